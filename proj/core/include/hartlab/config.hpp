#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hartlab/env.hpp"
#include "hartlab/optim.hpp"
#include "hartlab/trainer.hpp"

namespace hartlab::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Stage { Rl, Sft };

// One experiment definition: environment, optimizer, SFT settings and run
// plumbing. Parsed from a flat sectioned key=value file; unknown keys are
// errors so configs cannot silently drift.
struct RunConfig {
  env::EnvConfig env;
  optim::OptimConfig optim;
  trainer::SftConfig sft;
  trainer::Method method = trainer::Method::Apgrpo;
  std::vector<Stage> stages = {Stage::Rl};
  std::uint64_t eval_episodes = 20000;
  std::string output_dir = "out";
  int report_format_version = 1;
  int threads = 0;  // 0 = machine parallelism
  trainer::InstanceRanges ranges;

  void validate() const;  // throws ConfigError with field-level messages
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

// Canonical serialization with every default resolved; what gets written
// next to run outputs and hashed into every report.
std::string canonical_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // 16 hex digits

const char* method_name(trainer::Method m);
const char* mode_name(env::Mode m);
const char* stage_name(Stage s);

}  // namespace hartlab::config
