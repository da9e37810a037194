// hartlab command-line entry point: wires experiment configs to the
// trainer, simulator, diagnostics and the grounding-record eval harness.
// Every run writes its resolved config next to its outputs and embeds
// (tool_version, config_hash, seed) in each report, so any artifact can be
// reproduced from the artifact alone.
//
// Exit codes: 0 success, 1 check failure (gradcheck), 2 invalid
// config/usage, 3 IO failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hartlab/config.hpp"
#include "hartlab/env.hpp"
#include "hartlab/evalharness.hpp"
#include "hartlab/optim.hpp"
#include "hartlab/policy.hpp"
#include "hartlab/report.hpp"
#include "hartlab/rng.hpp"
#include "hartlab/stats.hpp"
#include "hartlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace hartlab;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> method;
  std::optional<int> steps;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_training_overrides = false) {
  cmd->add_option("--config,-c", flags.config_path, "experiment config file");
  cmd->add_option("--output-dir,-o", flags.output_dir, "directory for reports and artifacts");
  cmd->add_option("--seed", flags.seed, "override env.seed");
  cmd->add_option("--threads", flags.threads, "cap worker threads (0 = machine parallelism)");
  if (with_training_overrides) {
    cmd->add_option("--method", flags.method, "override run.method (grpo|apgrpo)");
    cmd->add_option("--steps", flags.steps, "override optim.steps");
  }
}

config::RunConfig resolve_config(const CommonFlags& flags) {
  config::RunConfig cfg =
      flags.config_path.empty() ? config::RunConfig{} : config::load_config(flags.config_path);
  if (flags.seed) cfg.env.seed = *flags.seed;
  if (!flags.output_dir.empty()) cfg.output_dir = flags.output_dir;
  if (const char* env_threads = std::getenv("HARTLAB_THREADS")) {
    cfg.threads = std::atoi(env_threads);
  }
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.method) {
    if (*flags.method == "grpo") {
      cfg.method = trainer::Method::Grpo;
    } else if (*flags.method == "apgrpo") {
      cfg.method = trainer::Method::Apgrpo;
    } else {
      throw config::ConfigError("--method must be \"grpo\" or \"apgrpo\"");
    }
  }
  if (flags.steps) cfg.optim.steps = *flags.steps;
  cfg.validate();
  return cfg;
}

fs::path prepare_output_dir(const config::RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw report::IoError("cannot create output dir " + dir.string() + ": " + ec.message());
  report::write_text_file((dir / "resolved_config.toml").string(), config::canonical_text(cfg));
  return dir;
}

json report_header(const config::RunConfig& cfg, const char* kind) {
  return json{{"format_version", cfg.report_format_version},
              {"tool_version", std::string(report::kToolVersion)},
              {"config_hash", config::config_hash(cfg)},
              {"seed", cfg.env.seed},
              {"kind", kind}};
}

json joint_json(const stats::JointStats& joint) {
  return json{{"n11", joint.n11}, {"n01", joint.n01}, {"n10", joint.n10}, {"n00", joint.n00}};
}

json eval_report_json(const config::RunConfig& cfg, const trainer::EvalReport& report) {
  json j = report_header(cfg, "eval_report");
  j["episodes"] = report.episodes;
  j["answer_accuracy"] = report.answer_accuracy;
  j["grounding_accuracy"] = report.grounding_accuracy;
  j["joint"] = joint_json(report.joint);
  j["mi_nats"] = report.mi_nats;
  j["mi_bits"] = stats::nats_to_bits(report.mi_nats);
  return j;
}

void write_json(const fs::path& path, const json& j) {
  report::write_text_file(path.string(), j.dump(2) + "\n");
}

std::string metrics_csv(const config::RunConfig& cfg, const trainer::TrainHistory& history) {
  std::string out = "# hartlab metrics format_version=1 tool_version=";
  out += report::kToolVersion;
  out += " config_hash=" + config::config_hash(cfg);
  out += " seed=" + std::to_string(cfg.env.seed) + "\n";
  out += "step,objective,answer_acc,grounding_acc,mean_kl,mean_mu1,mean_mu2\n";
  for (const auto& m : history.steps) {
    out += std::to_string(m.step);
    for (double v : {m.objective, m.answer_acc, m.grounding_acc, m.mean_kl, m.mean_mu1, m.mean_mu2}) {
      out += ",";
      out += report::format_double(v);
    }
    out += "\n";
  }
  return out;
}

policy::PolicyParams named_policy(const std::string& spec, const env::EnvConfig& cfg,
                                  double roi_margin, double ans_margin) {
  if (spec == "uniform") return policy::PolicyParams(env::dims_for(cfg));
  if (spec == "oracle") return env::make_oracle_policy(cfg, roi_margin, ans_margin);
  return policy::load_checkpoint(spec);
}

// ---------------------------------------------------------------- train/eval

int cmd_train(const CommonFlags& flags) {
  const config::RunConfig cfg = resolve_config(flags);
  const fs::path dir = prepare_output_dir(cfg);

  policy::PolicyParams params{env::dims_for(cfg.env)};
  trainer::TrainHistory history;
  bool ran_rl = false;
  std::uint64_t rl_indices_used = 0;
  for (const config::Stage stage : cfg.stages) {
    if (stage == config::Stage::Rl) {
      auto result = trainer::train_rl(cfg.env, cfg.optim, cfg.method, std::move(params), cfg.ranges);
      params = std::move(result.params);
      history = std::move(result.history);
      ran_rl = true;
      rl_indices_used = static_cast<std::uint64_t>(cfg.optim.steps);
    } else {
      params = trainer::train_sft(params, cfg.env, cfg.sft, cfg.ranges, rl_indices_used);
    }
  }

  if (ran_rl) {
    report::write_text_file((dir / "metrics.csv").string(), metrics_csv(cfg, history));
  }
  policy::save_checkpoint(params, (dir / "checkpoint.json").string());

  const trainer::EvalReport eval =
      trainer::evaluate(params, cfg.env, cfg.eval_episodes, cfg.ranges.eval_base, cfg.threads);
  write_json(dir / "eval_report.json", eval_report_json(cfg, eval));

  std::printf("train: %s done; answer_acc=%.4f grounding_acc=%.4f (reports in %s)\n",
              config::method_name(cfg.method), eval.answer_accuracy, eval.grounding_accuracy,
              dir.string().c_str());
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& params_path,
             std::optional<std::uint64_t> episodes) {
  config::RunConfig cfg = resolve_config(flags);
  if (episodes) cfg.eval_episodes = *episodes;
  cfg.validate();
  const fs::path dir = prepare_output_dir(cfg);

  const policy::PolicyParams params = policy::load_checkpoint(params_path);
  const trainer::EvalReport eval =
      trainer::evaluate(params, cfg.env, cfg.eval_episodes, cfg.ranges.eval_base, cfg.threads);
  write_json(dir / "eval_report.json", eval_report_json(cfg, eval));
  std::printf("eval: answer_acc=%.4f grounding_acc=%.4f mi=%.6f nats\n", eval.answer_accuracy,
              eval.grounding_accuracy, eval.mi_nats);
  return 0;
}

// ----------------------------------------------------------------------- gen

int cmd_gen(const CommonFlags& flags, std::uint64_t count, std::uint64_t instance_base) {
  const config::RunConfig cfg = resolve_config(flags);
  const fs::path dir = prepare_output_dir(cfg);

  json header = report_header(cfg, "env_instances");
  header["count"] = count;
  header["instance_base"] = instance_base;
  std::string out = header.dump() + "\n";
  for (std::uint64_t i = 0; i < count; ++i) {
    auto gen = rng::stream(cfg.env.seed, {env::kStreamInstance, instance_base + i});
    const env::Instance inst = env::gen_instance(cfg.env, gen);
    const json line{{"index", instance_base + i},
                    {"seed", cfg.env.seed},
                    {"evidence_cell", inst.evidence_cell},
                    {"answer", inst.answer},
                    {"cue", inst.cue_cell}};
    out += line.dump() + "\n";
  }
  report::write_text_file((dir / "instances.jsonl").string(), out);
  std::printf("gen: wrote %llu instances to %s\n", static_cast<unsigned long long>(count),
              (dir / "instances.jsonl").string().c_str());
  return 0;
}

// --------------------------------------------------------------- diagnostics

int cmd_prop1(const CommonFlags& flags, std::uint64_t episodes, int seeds,
              const std::string& policy_spec, double roi_margin, double ans_margin,
              std::optional<double> lambda) {
  config::RunConfig cfg = resolve_config(flags);
  if (cfg.env.mode != env::Mode::Hart) {
    throw config::ConfigError("diagnose-prop1 expects env.mode = \"hart\" in the config");
  }
  if (lambda) cfg.env.leak_prob = *lambda;
  cfg.validate();
  const fs::path dir = prepare_output_dir(cfg);

  env::EnvConfig hart = cfg.env;
  env::EnvConfig baseline = cfg.env;
  baseline.mode = env::Mode::Baseline;
  const policy::PolicyParams params = named_policy(policy_spec, cfg.env, roi_margin, ans_margin);

  const trainer::Prop1Report report =
      trainer::prop1_diagnostic(hart, baseline, params, episodes, seeds, cfg.threads);

  json j = report_header(cfg, "prop1_report");
  j["episodes_per_mode"] = report.episodes_per_mode;
  j["n_seeds"] = seeds;
  j["policy"] = policy_spec;
  j["leak_prob"] = cfg.env.leak_prob;
  j["median_diff_nats"] = report.median_diff;
  j["frac_hart_greater"] = report.frac_hart_greater;
  json rows = json::array();
  for (const auto& row : report.per_seed) {
    rows.push_back(json{{"seed", row.seed},
                        {"mi_hart_nats", row.mi_hart},
                        {"mi_baseline_nats", row.mi_baseline},
                        {"diff_nats", row.diff}});
  }
  j["per_seed"] = rows;
  write_json(dir / "prop1_report.json", j);
  std::printf("diagnose-prop1: hart > baseline in %.0f%% of %d seeds (median diff %.6f nats)\n",
              report.frac_hart_greater * 100.0, seeds, report.median_diff);
  return 0;
}

json fit_json(const trainer::DecompositionFit& fit) {
  return json{{"alpha", fit.alpha},         {"residual", fit.residual},
              {"d_dot_v", fit.d_dot_v},     {"d_norm", fit.d_norm},
              {"v_norm", fit.v_norm},       {"alpha_in_unit", fit.alpha_in_unit},
              {"vacuous", fit.vacuous},     {"degenerate", fit.degenerate}};
}

int cmd_prop2(const CommonFlags& flags, int actions, int correct, double q1, double q0_hart,
              double q0_baseline, const std::string& policy_spec, std::uint64_t policy_seed) {
  config::RunConfig cfg = resolve_config(flags);
  const fs::path dir = prepare_output_dir(cfg);

  trainer::SingleStepEnvSpec hart;
  hart.num_actions = actions;
  hart.correct_action = correct;
  hart.features = {1.0, -0.5, 0.25};
  hart.p_reward_given_correct = q1;
  hart.p_reward_given_incorrect = q0_hart;
  trainer::SingleStepEnvSpec baseline = hart;
  baseline.p_reward_given_incorrect = q0_baseline;
  hart.validate();
  baseline.validate();

  const policy::PolicyDims dims{actions, static_cast<int>(hart.features.size()), 2, 1};
  policy::PolicyParams params{dims};
  if (policy_spec == "random") {
    rng::Xoshiro256pp gen(policy_seed);
    params = policy::PolicyParams::random(dims, gen, 0.6);
  } else if (policy_spec != "uniform") {
    params = policy::load_checkpoint(policy_spec);
  }

  const trainer::Prop2Report report = trainer::prop2_diagnostic(params, hart, baseline, cfg.optim);

  json j = report_header(cfg, "prop2_report");
  j["env"] = json{{"actions", actions},
                  {"correct_action", correct},
                  {"p_reward_given_correct", q1},
                  {"p_reward_given_incorrect_hart", q0_hart},
                  {"p_reward_given_incorrect_baseline", q0_baseline}};
  j["k"] = cfg.optim.k;
  j["policy"] = policy_spec;
  j["same_channel"] = fit_json(report.same_channel);
  j["cross_channel"] = fit_json(report.cross_channel);
  j["p01_hart"] = report.p01_hart;
  j["p01_baseline"] = report.p01_baseline;
  write_json(dir / "prop2_report.json", j);
  std::printf(
      "diagnose-prop2: same-channel alpha=%.6f residual=%.3e; cross-channel alpha=%.6f "
      "residual=%.3e\n",
      report.same_channel.alpha, report.same_channel.residual, report.cross_channel.alpha,
      report.cross_channel.residual);
  return 0;
}

// ----------------------------------------------------------------- gradcheck

struct GradcheckWorst {
  double rel_error = 0.0;
  std::size_t coordinate = 0;
  int instance = -1;
  std::string kind;
};

int cmd_gradcheck(const CommonFlags& flags, int instances, double h, double tolerance) {
  config::RunConfig cfg = resolve_config(flags);
  const fs::path dir = prepare_output_dir(cfg);

  env::EnvConfig small;
  small.grid_g = 3;
  small.num_answers = 3;
  small.cue_noise = 0.25;
  small.seed = cfg.env.seed;
  optim::OptimConfig ocfg = cfg.optim;
  ocfg.beta = 0.1;  // exercise the KL path
  ocfg.clip_ratio = 0.0;

  std::vector<GradcheckWorst> failures;
  json per_kind = json::object();
  const auto record = [&](const char* kind, int instance, std::span<const double> analytic,
                          std::span<const double> numeric) {
    double diff2 = 0.0, scale2 = 0.0;
    std::size_t worst_j = 0;
    double worst_abs = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      const double d = analytic[j] - numeric[j];
      diff2 += d * d;
      scale2 = std::max(scale2, std::max(analytic[j] * analytic[j], numeric[j] * numeric[j]));
      if (std::abs(d) > worst_abs) {
        worst_abs = std::abs(d);
        worst_j = j;
      }
    }
    double a2 = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      a2 += analytic[j] * analytic[j];
      n2 += numeric[j] * numeric[j];
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    if (!per_kind.contains(kind)) per_kind[kind] = json::array();
    per_kind[kind].push_back(rel);
    if (!(rel < tolerance)) {
      failures.push_back(GradcheckWorst{rel, worst_j, instance, kind});
    }
  };

  for (int i = 0; i < instances; ++i) {
    const std::uint64_t key = static_cast<std::uint64_t>(i);
    rng::Xoshiro256pp pgen(rng::derive_seed(small.seed, {100, key}));
    const auto actor = policy::PolicyParams::random(env::dims_for(small), pgen, 0.5);
    const auto params = policy::PolicyParams::random(env::dims_for(small), pgen, 0.5);
    const auto ref = policy::PolicyParams::random(env::dims_for(small), pgen, 0.5);

    auto inst_gen = rng::stream(small.seed, {env::kStreamInstance, key});
    const auto inst = env::gen_instance(small, inst_gen);
    const auto group = trainer::rollout_group(actor, inst, small, ocfg.group_size, key, ocfg.eps_std);

    for (auto kind : {optim::ObjectiveKind::Grpo, optim::ObjectiveKind::Apgrpo}) {
      const auto analytic = optim::objective_gradient(kind, group, params, ref, ocfg);
      const auto f = [&](std::span<const double> flat) {
        policy::PolicyParams q(params.dims());
        std::copy(flat.begin(), flat.end(), q.flat().begin());
        return kind == optim::ObjectiveKind::Grpo ? optim::grpo_objective(group, q, ref, ocfg)
                                                  : optim::apgrpo_objective(group, q, ref, ocfg);
      };
      const auto numeric = optim::finite_diff_gradient(f, params.flat(), h);
      record(kind == optim::ObjectiveKind::Grpo ? "grpo" : "apgrpo", i, analytic, numeric);
    }

    std::vector<optim::SftExample> dataset;
    auto data_gen = rng::stream(small.seed, {env::kStreamInstance, 1000 + key});
    for (int d = 0; d < 6; ++d) {
      const auto ex = env::gen_instance(small, data_gen);
      dataset.push_back(optim::SftExample{env::observe_full(ex, small), ex.answer});
    }
    const auto analytic = optim::sft_gradient(params, dataset);
    const auto f = [&](std::span<const double> flat) {
      policy::PolicyParams q(params.dims());
      std::copy(flat.begin(), flat.end(), q.flat().begin());
      return optim::sft_loss(q, dataset);
    };
    const auto numeric = optim::finite_diff_gradient(f, params.flat(), h);
    record("sft", i, analytic, numeric);
  }

  json j = report_header(cfg, "gradcheck_report");
  j["instances"] = instances;
  j["h"] = h;
  j["tolerance"] = tolerance;
  j["rel_errors"] = per_kind;
  j["passed"] = failures.empty();
  write_json(dir / "gradcheck_report.json", j);

  if (!failures.empty()) {
    for (const auto& fail : failures) {
      std::fprintf(stderr, "gradcheck FAIL: kind=%s instance=%d rel_error=%.3e worst_coordinate=%zu\n",
                   fail.kind.c_str(), fail.instance, fail.rel_error, fail.coordinate);
    }
    return 1;
  }
  std::printf("gradcheck: %d instances x {grpo, apgrpo, sft} all below %.1e\n", instances,
              tolerance);
  return 0;
}

// --------------------------------------------------------------- pilot/sweep

evalharness::SweepMetric parse_metric(const std::string& name) {
  if (name == "iogt") return evalharness::SweepMetric::Iogt;
  if (name == "iou") return evalharness::SweepMetric::Iou;
  throw config::ConfigError("--metric must be \"iogt\" or \"iou\"");
}

geometry::GtAggregation parse_agg(const std::string& name) {
  if (name == "all") return geometry::GtAggregation::All;
  if (name == "any") return geometry::GtAggregation::Any;
  throw config::ConfigError("--agg must be \"all\" or \"any\"");
}

std::vector<double> parse_taus(const std::string& spec) {
  std::vector<double> taus;
  if (spec.find(':') != std::string::npos) {
    double start = 0.0, stop = 0.0, step = 0.0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0.0) {
      throw config::ConfigError("--taus range must be start:stop:step with step > 0");
    }
    for (double t = start; t <= stop + 1e-12; t += step) taus.push_back(t);
  } else {
    std::size_t pos = 0;
    while (pos < spec.size()) {
      std::size_t next = spec.find(',', pos);
      if (next == std::string::npos) next = spec.size();
      taus.push_back(std::atof(spec.substr(pos, next - pos).c_str()));
      pos = next + 1;
    }
  }
  if (taus.empty()) throw config::ConfigError("--taus produced no thresholds");
  return taus;
}

json header_for_records(const std::string& kind, const std::string& input, double tau,
                        const std::string& metric, const std::string& agg) {
  const std::string canonical = kind + "|" + input + "|" + report::format_double(tau) + "|" +
                                metric + "|" + agg;
  return json{{"format_version", 1},
              {"tool_version", std::string(report::kToolVersion)},
              {"config_hash", report::to_hex(report::fnv1a64(canonical))},
              {"seed", 0},
              {"kind", kind}};
}

int cmd_pilot(const std::string& input, double tau, const std::string& metric_name,
              const std::string& agg_name, bool lenient, const std::string& output_dir,
              const std::string& csv_path) {
  const auto metric = parse_metric(metric_name);
  const auto agg = parse_agg(agg_name);
  evalharness::ParseOptions opts;
  opts.lenient = lenient;
  const auto parsed = evalharness::read_records(input, opts);
  const auto report = evalharness::pilot_report(parsed.records, tau, metric, agg);

  std::vector<double> taus;
  for (int i = 0; i <= 19; ++i) taus.push_back(0.05 * i);
  const auto sweep = evalharness::threshold_sweep(parsed.records, taus, metric, agg);

  json j = header_for_records("pilot_report", input, tau, metric_name, agg_name);
  j["input"] = input;
  j["records"] = parsed.records.size();
  j["skipped_lines"] = parsed.skipped;
  j["tau"] = tau;
  j["metric"] = metric_name;
  j["aggregation"] = agg_name;
  j["counts"] = joint_json(report.joint);
  json proportions;
  proportions["answer_accuracy"] =
      static_cast<double>(report.joint.n11 + report.joint.n01) / static_cast<double>(report.joint.total());
  proportions["grounding_accuracy"] =
      static_cast<double>(report.joint.n11 + report.joint.n10) / static_cast<double>(report.joint.total());
  if (report.misgrounded_given_correct) {
    proportions["misgrounded_given_correct"] = *report.misgrounded_given_correct;
  } else {
    proportions["misgrounded_given_correct"] = nullptr;
  }
  j["proportions"] = proportions;
  j["mi_nats"] = report.mi_nats;
  j["mi_bits"] = stats::nats_to_bits(report.mi_nats);
  json sweep_json = json::array();
  for (const auto& point : sweep) {
    sweep_json.push_back(json{{"tau", point.tau}, {"grounding_accuracy", point.grounding_accuracy}});
  }
  j["sweep"] = sweep_json;

  fs::create_directories(output_dir);
  write_json(fs::path(output_dir) / "pilot_report.json", j);

  if (!csv_path.empty()) {
    std::string csv = "id,score,grounding_correct,answer_correct,flagged\n";
    for (const auto& c : report.per_record) {
      csv += c.id + "," + report::format_double(c.score) + "," +
             (c.grounding_correct ? "1" : "0") + "," + (c.answer_correct ? "1" : "0") + "," +
             (c.flagged ? "1" : "0") + "\n";
    }
    report::write_text_file(csv_path, csv);
  }

  if (report.misgrounded_given_correct) {
    std::printf("pilot: %zu records, misgrounded_given_correct=%.1f%% (tau=%.2f, %s)\n",
                parsed.records.size(), *report.misgrounded_given_correct * 100.0, tau,
                metric_name.c_str());
  } else {
    std::printf("pilot: %zu records, no correct answers (tau=%.2f)\n", parsed.records.size(), tau);
  }
  return 0;
}

int cmd_sweep(const std::string& input, const std::string& taus_spec,
              const std::string& metric_name, const std::string& agg_name, bool lenient,
              const std::string& output_dir) {
  const auto metric = parse_metric(metric_name);
  const auto agg = parse_agg(agg_name);
  const auto taus = parse_taus(taus_spec);
  evalharness::ParseOptions opts;
  opts.lenient = lenient;
  const auto parsed = evalharness::read_records(input, opts);
  const auto sweep = evalharness::threshold_sweep(parsed.records, taus, metric, agg);

  json j = header_for_records("sweep_report", input, taus.front(), metric_name, agg_name);
  j["input"] = input;
  j["records"] = parsed.records.size();
  j["metric"] = metric_name;
  j["aggregation"] = agg_name;
  json sweep_json = json::array();
  for (const auto& point : sweep) {
    sweep_json.push_back(json{{"tau", point.tau}, {"grounding_accuracy", point.grounding_accuracy}});
  }
  j["sweep"] = sweep_json;
  fs::create_directories(output_dir);
  write_json(fs::path(output_dir) / "sweep_report.json", j);
  std::printf("sweep: %zu thresholds over %zu records (%s)\n", taus.size(),
              parsed.records.size(), metric_name.c_str());
  return 0;
}

void print_structured_error(const char* type, const std::string& message) {
  const json err{{"error", {{"type", type}, {"message", message}}}};
  std::fprintf(stderr, "%s\n", err.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hartlab: closed-loop grounded-QA RL laboratory"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, gen_flags, p1_flags, p2_flags, gc_flags;

  auto* train = app.add_subcommand("train", "run the configured training stages and evaluate");
  add_common(train, train_flags, true);

  auto* eval = app.add_subcommand("eval", "evaluate a saved policy checkpoint");
  add_common(eval, eval_flags);
  std::string eval_params;
  std::optional<std::uint64_t> eval_episodes;
  eval->add_option("--params", eval_params, "policy checkpoint JSON")->required();
  eval->add_option("--episodes", eval_episodes, "override run.eval_episodes");

  auto* gen = app.add_subcommand("gen", "dump synthetic instances to JSONL for audit");
  add_common(gen, gen_flags);
  std::uint64_t gen_count = 1000;
  std::uint64_t gen_base = 0;
  gen->add_option("--n", gen_count, "number of instances");
  gen->add_option("--instance-base", gen_base, "first instance index");

  auto* prop1 = app.add_subcommand("diagnose-prop1",
                                   "mutual-information comparison of hart vs baseline modes");
  add_common(prop1, p1_flags);
  std::uint64_t p1_episodes = 100000;
  int p1_seeds = 20;
  std::string p1_policy = "oracle";
  double p1_roi_margin = 200.0, p1_ans_margin = 200.0;
  std::optional<double> p1_lambda;
  prop1->add_option("--episodes", p1_episodes, "evaluation episodes per mode");
  prop1->add_option("--seeds", p1_seeds, "number of derived seeds");
  prop1->add_option("--policy", p1_policy, "uniform | oracle | <checkpoint.json>");
  prop1->add_option("--roi-margin", p1_roi_margin, "oracle policy roi logit margin");
  prop1->add_option("--ans-margin", p1_ans_margin, "oracle policy answer logit margin");
  prop1->add_option("--lambda", p1_lambda, "override env.leak_prob for the pair");

  auto* prop2 = app.add_subcommand("diagnose-prop2",
                                   "exact gradient decomposition on a single-step environment");
  add_common(prop2, p2_flags);
  int p2_actions = 4, p2_correct = 1;
  double p2_q1 = 0.9, p2_q0_hart = 0.3, p2_q0_base = 0.3;
  std::string p2_policy = "random";
  std::uint64_t p2_policy_seed = 55;
  prop2->add_option("--actions", p2_actions, "number of single-step actions");
  prop2->add_option("--correct-action", p2_correct, "index of the grounded action");
  prop2->add_option("--q1", p2_q1, "P(r=1 | grounded)");
  prop2->add_option("--q0-hart", p2_q0_hart, "P(r=1 | not grounded), hart channel");
  prop2->add_option("--q0-baseline", p2_q0_base, "P(r=1 | not grounded), baseline channel");
  prop2->add_option("--policy", p2_policy, "random | uniform | <checkpoint.json>");
  prop2->add_option("--policy-seed", p2_policy_seed, "seed for the random policy");

  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "verify analytic gradients against central differences");
  add_common(gradcheck, gc_flags);
  int gc_instances = 20;
  double gc_h = 1e-5, gc_tolerance = 1e-5;
  gradcheck->add_option("--instances", gc_instances, "random instances per objective");
  gradcheck->add_option("--fd-step", gc_h, "finite-difference step");
  gradcheck->add_option("--tolerance", gc_tolerance, "relative error bound");

  auto* pilot = app.add_subcommand("pilot", "joint grounding/answer statistics for a record file");
  std::string pilot_input, pilot_metric = "iogt", pilot_agg = "all", pilot_out = "out";
  std::string pilot_csv;
  double pilot_tau = 0.3;
  bool pilot_lenient = false;
  pilot->add_option("--input", pilot_input, "JSONL grounding records")->required();
  pilot->add_option("--tau", pilot_tau, "grounding threshold");
  pilot->add_option("--metric", pilot_metric, "iogt | iou");
  pilot->add_option("--agg", pilot_agg, "multi-gt aggregation: all | any");
  pilot->add_option("--output-dir,-o", pilot_out, "directory for the report");
  pilot->add_option("--csv", pilot_csv, "also write per-record classifications to this CSV");
  pilot->add_flag("--lenient", pilot_lenient, "skip malformed lines instead of failing");

  auto* sweep = app.add_subcommand("sweep", "grounding accuracy over a threshold range");
  std::string sweep_input, sweep_metric = "iogt", sweep_agg = "all", sweep_out = "out";
  std::string sweep_taus = "0.0:0.95:0.05";
  bool sweep_lenient = false;
  sweep->add_option("--input", sweep_input, "JSONL grounding records")->required();
  sweep->add_option("--taus", sweep_taus, "start:stop:step or comma list");
  sweep->add_option("--metric", sweep_metric, "iogt | iou");
  sweep->add_option("--agg", sweep_agg, "multi-gt aggregation: all | any");
  sweep->add_option("--output-dir,-o", sweep_out, "directory for the report");
  sweep->add_flag("--lenient", sweep_lenient, "skip malformed lines instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed()) return cmd_eval(eval_flags, eval_params, eval_episodes);
    if (gen->parsed()) return cmd_gen(gen_flags, gen_count, gen_base);
    if (prop1->parsed()) {
      return cmd_prop1(p1_flags, p1_episodes, p1_seeds, p1_policy, p1_roi_margin, p1_ans_margin,
                       p1_lambda);
    }
    if (prop2->parsed()) {
      return cmd_prop2(p2_flags, p2_actions, p2_correct, p2_q1, p2_q0_hart, p2_q0_base, p2_policy,
                       p2_policy_seed);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(gc_flags, gc_instances, gc_h, gc_tolerance);
    if (pilot->parsed()) {
      return cmd_pilot(pilot_input, pilot_tau, pilot_metric, pilot_agg, pilot_lenient, pilot_out,
                       pilot_csv);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_input, sweep_taus, sweep_metric, sweep_agg, sweep_lenient, sweep_out);
    }
  } catch (const config::ConfigError& e) {
    print_structured_error("config", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    print_structured_error("config", e.what());
    return 2;
  } catch (const report::IoError& e) {
    print_structured_error("io", e.what());
    return 3;
  } catch (const fs::filesystem_error& e) {
    print_structured_error("io", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_structured_error("internal", e.what());
    return 3;
  }
  return 0;
}
