#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/baselines.hpp"
#include "tomdec/environments.hpp"
#include "tomdec/evidence.hpp"
#include "tomdec/learner.hpp"
#include "tomdec/mdp.hpp"
#include "tomdec/monitoring.hpp"

namespace tomdec {

/// Cumulative LLR detector over observed steps; never resets.
struct DetectorState {
  double cumulative = 0.0;
  double threshold = 0.0;
  bool detected = false;
  /// Observed steps scored so far.
  std::size_t observed_steps = 0;
  /// 1-based observed-step count and episode time of the first crossing.
  std::size_t crossing_index = 0;
  std::size_t crossing_time = 0;
};

/// Adds one observed step's LLR; the first time the sum exceeds the
/// threshold the crossing is recorded.
DetectorState detector_step(const DetectorState& state, double contribution, std::size_t time = 0);

/// A likelihood ratio of 20:1. Compliant behavior scores exactly zero when the
/// supervisor's ratios are exact, so the quantile alone would be zero.
inline constexpr double kMinDetectionThreshold = 2.995732273553991;

/// Empirical (1 - rate) quantile (nearest rank) of a sample.
double upper_quantile(std::vector<double> samples, double rate);

/// Threshold from the max cumulative LLR of pi_ref runs, raised to `floor`.
double calibrate_threshold(const TabularMdp& mdp, const TabularPolicy& pi_ref,
                           const MonitorModel& model, double false_alarm_rate,
                           std::size_t episodes, std::uint64_t seed,
                           double floor = kMinDetectionThreshold);

struct EvalSettings {
  std::size_t episodes = 1000;
  double threshold = kMinDetectionThreshold;
  std::size_t top_k = 3;
  std::uint64_t seed = 1;
  /// Keep per-step records (trace and calibration stream).
  bool keep_steps = false;
};

struct StepRecord {
  std::size_t episode = 0;
  std::size_t time = 0;
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  bool observed = false;
  double b_hat = 0.0;
  double log_ratio = 0.0;
  double delta = 0.0;
  double psi = 0.0;
  /// LLR if observed, else 0: the step's realized evidence contribution.
  double realized = 0.0;
  double cumulative_llr = 0.0;
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  double ret = 0.0;
  bool success = false;
  std::size_t steps = 0;
  std::size_t observed = 0;
  /// Mean psi over the episode's steps.
  double exposure = 0.0;
  double kl_sum = 0.0;
  double llr_sum = 0.0;
  std::size_t top_k_hits = 0;
  bool detected = false;
  /// Steps until first detection; the horizon when censored.
  std::size_t ttf = 0;
  bool censored = true;
};

struct MetricsReport {
  double mean_return = 0.0;
  double success_rate = 0.0;
  /// Mean over observed steps of log r + Delta (the LLR expected given s).
  double kl_at_obs = 0.0;
  /// Mean over observed steps of the realized LLR.
  double llr_at_obs = 0.0;
  double top_k_rate = 0.0;
  double mean_ttf = 0.0;
  double detection_rate = 0.0;
  double censored_fraction = 0.0;
  /// Mean per-step psi; the quantity the dual constrains.
  double exposure = 0.0;
  std::vector<EpisodeMetrics> episodes;
  std::vector<StepRecord> steps;
  std::string fingerprint;
  std::vector<std::uint64_t> seeds;
};

/// True when `a` is among pi_ref's k most likely actions (ties by index) or
/// the acting row is pi_ref's row, in which case every action is compliant.
bool top_k_compliant(std::span<const double> acting_row, std::span<const double> ref_row,
                     ActionId a, std::size_t k);

MetricsReport evaluate(const TabularMdp& mdp, const AugmentedPolicy& pi, const TabularPolicy& pi_ref,
                       const MonitorModel& model, const EvalSettings& settings);

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_predicted = 0.0;
  double mean_realized = 0.0;
  std::size_t count = 0;
};

struct CalibrationBins {
  std::vector<CalibrationBin> bins;
  double slope = 0.0;
  double intercept = 0.0;
  /// All predictions equal (or one occupied bin): slope undefined.
  bool degenerate = false;
};

struct CalibrationPoint {
  double predicted = 0.0;
  double realized = 0.0;
};

/// Equal-width bins over the predicted range; slope and intercept by least
/// squares over bin means weighted by counts.
CalibrationBins calibration_bins(const std::vector<CalibrationPoint>& stream, std::size_t bins = 20);
std::vector<CalibrationPoint> calibration_stream(const std::vector<StepRecord>& steps);

struct GapPoint {
  std::size_t lower = 1;
  std::size_t upper = 1;
};

struct SweepRow {
  GapPoint gap;
  std::uint64_t seed = 0;
  double ret = 0.0;
  double exposure = 0.0;
  double ttf = 0.0;
  double lambda = 0.0;
};

struct SweepSummary {
  GapPoint gap;
  double mean_return = 0.0;
  double mean_exposure = 0.0;
  double mean_ttf = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summary;
};

/// Trains and evaluates the learner at every gap and seed with the same
/// hyperparameters; rows are ordered by gap, then seed.
SweepTable gap_sweep(const Scenario& scenario, const std::vector<GapPoint>& gaps,
                     const TokenChannel& channel, const LearnerConfig& config,
                     const std::vector<std::uint64_t>& seeds, const EvalSettings& eval);

struct CompareRow {
  std::string method;
  double mean_return = 0.0;
  double success_rate = 0.0;
  double kl_at_obs = 0.0;
  double llr_at_obs = 0.0;
  double top_k_rate = 0.0;
  double mean_ttf = 0.0;
  double exposure = 0.0;
  /// Empty unless building or evaluating the method failed.
  std::string error;
};

/// One row per baseline spec plus a final row for the learner, each averaged
/// over seeds. A failing method records its error and the table continues.
std::vector<CompareRow> compare_table(const Scenario& scenario, const GapLaw& law,
                                      const TokenChannel& channel,
                                      const std::vector<BaselineSpec>& specs,
                                      const LearnerConfig& config,
                                      const std::vector<std::uint64_t>& seeds,
                                      const EvalSettings& eval);

struct BudgetMatch {
  double knob = 0.0;
  double exposure = 0.0;
  bool feasible = false;
};

/// Log-scale bisection over the baseline's knob range for the smallest knob
/// whose measured exposure is at most config.epsilon. When even the top of
/// the range exceeds the budget it is returned as infeasible.
BudgetMatch match_budget(const BaselineSpec& spec, const TabularMdp& mdp,
                         const TabularPolicy& pi_ref, const MonitorModel& model,
                         const LearnerConfig& config, const EvalSettings& eval,
                         std::size_t iterations = 7);

inline constexpr const char* kLearnerName = "tom-learner";

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tomdec
