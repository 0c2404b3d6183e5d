#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/baselines.hpp"
#include "tomdec/environments.hpp"
#include "tomdec/harness.hpp"
#include "tomdec/learner.hpp"
#include "tomdec/mdp.hpp"
#include "tomdec/monitoring.hpp"

namespace tomdec {

/// A configuration or input file failed validation. `field` is the dotted
/// path of the offending entry (empty for syntax errors).
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  ScenarioSpec scenario;
  GapLaw gap_law = GapLaw::uniform(1, 9);
  TokenChannel channel = TokenChannel::noiseless();
  LearnerConfig learner;
  std::vector<BaselineSpec> baselines;
  /// Explicit detector threshold; when absent it is calibrated.
  std::optional<double> threshold;
  double false_alarm_rate = 0.05;
  std::size_t calibration_episodes = 2000;
  std::size_t eval_episodes = 1000;
  std::size_t top_k = 3;
  std::vector<std::uint64_t> seeds{1};
  std::vector<GapPoint> sweep_gaps;
  std::string out_dir = "out";

  void validate() const;
};

/// Parses a config document; syntax errors carry the line number and field
/// errors the dotted path. `learner.epsilon` is required.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string dump_config(const ExperimentConfig& config);

/// Short hex digest of the canonical config text.
std::string config_fingerprint(const ExperimentConfig& config);

std::string dump_policy(const AugmentedPolicy& policy);
AugmentedPolicy parse_policy(const std::string& text);
AugmentedPolicy load_policy(const std::string& path);

std::string dump_mdp(const TabularMdp& mdp);
TabularMdp parse_mdp(const std::string& text);

std::string read_file(const std::string& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

/// Fixed-precision number formatting shared by every writer.
std::string fmt_num(double value);

std::string metrics_csv(const MetricsReport& report, const std::string& fingerprint);
std::string trace_jsonl(const MetricsReport& report, const std::string& fingerprint);
std::string compare_csv(const std::vector<CompareRow>& rows, const std::string& fingerprint);
std::string sweep_csv(const SweepTable& table, const std::string& fingerprint);
std::string bins_csv(const CalibrationBins& bins, const std::string& fingerprint);
std::string training_log_csv(const std::vector<EpisodeLog>& log, const std::string& fingerprint);

}  // namespace tomdec
