#include "hartlab/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "hartlab/report.hpp"

namespace hartlab::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// strips an unquoted trailing comment
std::string strip_comment(const std::string& s) {
  bool in_quotes = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_quotes = !in_quotes;
    if (s[i] == '#' && !in_quotes) return s.substr(0, i);
  }
  return s;
}

struct RawValue {
  std::string text;
  std::string where;  // "origin:line" for error messages
};

[[noreturn]] void fail(const RawValue& v, const std::string& key, const std::string& why) {
  throw ConfigError(v.where + ": " + key + ": " + why);
}

long long as_int(const RawValue& v, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const long long out = std::strtoll(v.text.c_str(), &end, 10);
  if (errno != 0 || end == v.text.c_str() || *end != '\0') {
    fail(v, key, "expected an integer, got \"" + v.text + "\"");
  }
  return out;
}

double as_double(const RawValue& v, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const double out = std::strtod(v.text.c_str(), &end);
  if (errno != 0 || end == v.text.c_str() || *end != '\0') {
    fail(v, key, "expected a number, got \"" + v.text + "\"");
  }
  return out;
}

std::uint64_t as_u64(const RawValue& v, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long out = std::strtoull(v.text.c_str(), &end, 10);
  if (errno != 0 || end == v.text.c_str() || *end != '\0' || v.text.find('-') != std::string::npos) {
    fail(v, key, "expected a nonnegative integer, got \"" + v.text + "\"");
  }
  return out;
}

std::string as_string(const RawValue& v, const std::string& key) {
  std::string t = v.text;
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
    return t.substr(1, t.size() - 2);
  }
  if (t.find('"') != std::string::npos) fail(v, key, "unbalanced quotes");
  return t;
}

}  // namespace

void RunConfig::validate() const {
  try {
    env.validate();
    optim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (stages.empty()) throw ConfigError("run.stages must list at least one stage");
  if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (output_dir.empty()) throw ConfigError("run.output_dir must be nonempty");
  if (report_format_version != 1) throw ConfigError("run.report_format_version must be 1");
  if (threads < 0) throw ConfigError("run.threads must be >= 0");
  if (sft.n_examples < 1) throw ConfigError("sft.examples must be >= 1");
  if (!(sft.lr > 0.0)) throw ConfigError("sft.lr must be > 0");
  if (sft.steps < 0) throw ConfigError("sft.steps must be >= 0");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream lines(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);

    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      if (section != "env" && section != "optim" && section != "sft" && section != "run") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }

    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const RawValue value{trim(body.substr(eq + 1)), where};
    if (key.empty() || value.text.empty()) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key \"" + key + "\" outside any section");
    const std::string qual = section + "." + key;

    if (section == "env") {
      if (key == "grid") {
        cfg.env.grid_g = static_cast<int>(as_int(value, qual));
      } else if (key == "answers") {
        cfg.env.num_answers = static_cast<int>(as_int(value, qual));
      } else if (key == "cue_noise") {
        cfg.env.cue_noise = as_double(value, qual);
      } else if (key == "leak_prob") {
        cfg.env.leak_prob = as_double(value, qual);
      } else if (key == "mode") {
        const std::string m = as_string(value, qual);
        if (m == "hart") {
          cfg.env.mode = env::Mode::Hart;
        } else if (m == "baseline") {
          cfg.env.mode = env::Mode::Baseline;
        } else {
          fail(value, qual, "must be \"hart\" or \"baseline\"");
        }
      } else if (key == "seed") {
        cfg.env.seed = as_u64(value, qual);
      } else {
        throw ConfigError(where + ": unknown key " + qual);
      }
    } else if (section == "optim") {
      if (key == "group_size") {
        cfg.optim.group_size = static_cast<int>(as_int(value, qual));
      } else if (key == "beta") {
        cfg.optim.beta = as_double(value, qual);
      } else if (key == "k") {
        cfg.optim.k = as_double(value, qual);
      } else if (key == "lr") {
        cfg.optim.lr = as_double(value, qual);
      } else if (key == "eps_std") {
        cfg.optim.eps_std = as_double(value, qual);
      } else if (key == "steps") {
        cfg.optim.steps = static_cast<int>(as_int(value, qual));
      } else if (key == "clip_ratio") {
        cfg.optim.clip_ratio = as_double(value, qual);
      } else if (key == "inner_epochs") {
        cfg.optim.inner_epochs = static_cast<int>(as_int(value, qual));
      } else {
        throw ConfigError(where + ": unknown key " + qual);
      }
    } else if (section == "sft") {
      if (key == "examples") {
        cfg.sft.n_examples = static_cast<int>(as_int(value, qual));
      } else if (key == "lr") {
        cfg.sft.lr = as_double(value, qual);
      } else if (key == "steps") {
        cfg.sft.steps = static_cast<int>(as_int(value, qual));
      } else {
        throw ConfigError(where + ": unknown key " + qual);
      }
    } else {  // run
      if (key == "method") {
        const std::string m = as_string(value, qual);
        if (m == "grpo") {
          cfg.method = trainer::Method::Grpo;
        } else if (m == "apgrpo") {
          cfg.method = trainer::Method::Apgrpo;
        } else {
          fail(value, qual, "must be \"grpo\" or \"apgrpo\"");
        }
      } else if (key == "stages") {
        cfg.stages.clear();
        std::istringstream ss(as_string(value, qual));
        std::string stage;
        while (std::getline(ss, stage, ',')) {
          const std::string s = trim(stage);
          if (s == "rl") {
            cfg.stages.push_back(Stage::Rl);
          } else if (s == "sft") {
            cfg.stages.push_back(Stage::Sft);
          } else {
            fail(value, qual, "stage must be \"rl\" or \"sft\", got \"" + s + "\"");
          }
        }
        if (cfg.stages.empty()) fail(value, qual, "must list at least one stage");
      } else if (key == "eval_episodes") {
        cfg.eval_episodes = as_u64(value, qual);
      } else if (key == "output_dir") {
        cfg.output_dir = as_string(value, qual);
      } else if (key == "report_format_version") {
        cfg.report_format_version = static_cast<int>(as_int(value, qual));
      } else if (key == "threads") {
        cfg.threads = static_cast<int>(as_int(value, qual));
      } else if (key == "rl_instance_base") {
        cfg.ranges.rl_base = as_u64(value, qual);
      } else if (key == "sft_instance_base") {
        cfg.ranges.sft_base = as_u64(value, qual);
      } else if (key == "eval_instance_base") {
        cfg.ranges.eval_base = as_u64(value, qual);
      } else {
        throw ConfigError(where + ": unknown key " + qual);
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config_text(report::read_text_file(path), path);
}

const char* method_name(trainer::Method m) {
  return m == trainer::Method::Grpo ? "grpo" : "apgrpo";
}

const char* mode_name(env::Mode m) { return m == env::Mode::Hart ? "hart" : "baseline"; }

const char* stage_name(Stage s) { return s == Stage::Rl ? "rl" : "sft"; }

std::string canonical_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[env]\n";
  out << "grid = " << cfg.env.grid_g << "\n";
  out << "answers = " << cfg.env.num_answers << "\n";
  out << "cue_noise = " << report::format_double(cfg.env.cue_noise) << "\n";
  out << "leak_prob = " << report::format_double(cfg.env.leak_prob) << "\n";
  out << "mode = \"" << mode_name(cfg.env.mode) << "\"\n";
  out << "seed = " << cfg.env.seed << "\n";
  out << "\n[optim]\n";
  out << "group_size = " << cfg.optim.group_size << "\n";
  out << "beta = " << report::format_double(cfg.optim.beta) << "\n";
  out << "k = " << report::format_double(cfg.optim.k) << "\n";
  out << "lr = " << report::format_double(cfg.optim.lr) << "\n";
  out << "eps_std = " << report::format_double(cfg.optim.eps_std) << "\n";
  out << "steps = " << cfg.optim.steps << "\n";
  out << "clip_ratio = " << report::format_double(cfg.optim.clip_ratio) << "\n";
  out << "inner_epochs = " << cfg.optim.inner_epochs << "\n";
  out << "\n[sft]\n";
  out << "examples = " << cfg.sft.n_examples << "\n";
  out << "lr = " << report::format_double(cfg.sft.lr) << "\n";
  out << "steps = " << cfg.sft.steps << "\n";
  out << "\n[run]\n";
  out << "method = \"" << method_name(cfg.method) << "\"\n";
  out << "stages = \"";
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    if (i > 0) out << ",";
    out << stage_name(cfg.stages[i]);
  }
  out << "\"\n";
  out << "eval_episodes = " << cfg.eval_episodes << "\n";
  out << "output_dir = \"" << cfg.output_dir << "\"\n";
  out << "report_format_version = " << cfg.report_format_version << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "rl_instance_base = " << cfg.ranges.rl_base << "\n";
  out << "sft_instance_base = " << cfg.ranges.sft_base << "\n";
  out << "eval_instance_base = " << cfg.ranges.eval_base << "\n";
  return out.str();
}

std::string config_hash(const RunConfig& cfg) {
  return report::to_hex(report::fnv1a64(canonical_text(cfg)));
}

}  // namespace hartlab::config
