#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/mdp.hpp"

namespace tomdec {

/// ln d_pi^t(s) - ln d_ref^t(s) for every (t, s).
///
/// Entries where the reference marginal is below the floor are masked
/// (evidence undefined there). Entries where the agent marginal is zero are
/// clipped to ln(floor) - ln d_ref^t(s) so every valid entry stays finite.
struct StateRatioTable {
  std::size_t num_steps = 0;  // number of time slices (horizon + 1)
  std::size_t num_states = 0;
  double floor = 1e-12;
  std::vector<double> log_ratio;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> clipped;

  std::size_t idx(std::size_t t, StateId s) const { return t * num_states + s; }
  double at(std::size_t t, StateId s) const { return log_ratio[idx(t, s)]; }
  bool is_valid(std::size_t t, StateId s) const { return valid[idx(t, s)] != 0; }
  bool is_clipped(std::size_t t, StateId s) const { return clipped[idx(t, s)] != 0; }
  /// Ratio lookup that tolerates t beyond the last slice (uses the last one).
  double lookup(std::size_t t, StateId s) const {
    return at(std::min(t, num_steps - 1), s);
  }
};

/// One step of the ToM signal: psi = b_hat * (log_ratio + delta).
struct EvidenceRecord {
  std::size_t time = 0;
  double b_hat = 0.0;
  double log_ratio = 0.0;
  double delta = 0.0;
  double psi = 0.0;
};

/// Running exposure: discounted sum of psi plus a step-level EMA.
class ExposureLedger {
public:
  explicit ExposureLedger(double decay = 0.99, double discount = 1.0)
      : decay_(decay), discount_(discount) {}

  void add(const EvidenceRecord& rec);
  void begin_episode();

  double ema() const { return ema_; }
  bool has_value() const { return seeded_; }
  double discounted_sum() const { return discounted_sum_; }
  const std::vector<EvidenceRecord>& records() const { return records_; }
  void set_keep_records(bool keep) { keep_records_ = keep; }

private:
  double decay_;
  double discount_;
  double ema_ = 0.0;
  bool seeded_ = false;
  double discounted_sum_ = 0.0;
  double weight_ = 1.0;
  bool keep_records_ = true;
  std::vector<EvidenceRecord> records_;
};

constexpr double kDefaultRatioFloor = 1e-12;

StateRatioTable build_state_ratio(const OccupancyProfile& agent, const OccupancyProfile& reference,
                                  double floor = kDefaultRatioFloor);
StateRatioTable build_state_ratio(const TabularMdp& mdp, const TabularPolicy& pi,
                                  const TabularPolicy& pi_ref, double floor = kDefaultRatioFloor);
/// Ratio for a monitoring-aware policy, using exact joint marginals where
/// the monitor model allows.
StateRatioTable build_state_ratio(const TabularMdp& mdp, const AugmentedPolicy& pi,
                                  const TabularPolicy& pi_ref, const MonitorModel& model,
                                  double floor = kDefaultRatioFloor, std::uint64_t seed = 0);

EvidenceRecord tom_scalar(double b_hat, double log_ratio, double delta);

/// log r_t(s) + ln(pi(a) / pi_ref(a)); throws on masked states or a zero
/// reference probability.
double observed_llr(std::span<const double> pi_row, std::span<const double> ref_row,
                    const StateRatioTable& ratio, std::size_t t, StateId s, ActionId a);
double observed_llr(const TabularPolicy& pi, const TabularPolicy& pi_ref,
                    const StateRatioTable& ratio, std::size_t t, StateId s, ActionId a);

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo E[sum_t discount^t psi_t] with the exact filter for b_hat and
/// an exact ratio table for the evaluated policy.
MeanEstimate expected_exposure(const TabularMdp& mdp, const AugmentedPolicy& pi,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               double discount, std::size_t episodes, std::uint64_t seed);
MeanEstimate expected_exposure(const TabularMdp& mdp, const TabularPolicy& pi,
                               const TabularPolicy& pi_ref, const MonitorModel& model,
                               double discount, std::size_t episodes, std::uint64_t seed);

struct RealizedEvidence {
  double value = 0.0;
  /// An observed step landed on a masked state; its contribution is skipped.
  bool clipped = false;
};

/// Sum over observed steps of discount^t * LLR_t.
RealizedEvidence realized_evidence(const EpisodeTrace& trace, const AugmentedPolicy& pi,
                                   const TabularPolicy& pi_ref, const StateRatioTable& ratio,
                                   double discount = 1.0);

/// psi for one step given the acting row; shared by the learner and harness.
EvidenceRecord step_evidence(std::size_t t, StateId s, double b_hat,
                             std::span<const double> pi_row, std::span<const double> ref_row,
                             const StateRatioTable& ratio);

/// Runs one monitored episode under `pi` and records psi at every step and
/// the observed flags in the trace.
struct ScoredEpisode {
  EpisodeTrace trace;
  std::vector<EvidenceRecord> evidence;
};
ScoredEpisode run_scored_episode(const TabularMdp& mdp, const AugmentedPolicy& pi,
                                 const TabularPolicy& pi_ref, const MonitorModel& model,
                                 const StateRatioTable& ratio, Rng& rng);

}  // namespace tomdec
