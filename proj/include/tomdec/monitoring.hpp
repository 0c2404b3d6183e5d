#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tomdec/random.hpp"

namespace tomdec {

/// Age convention used throughout: the age at tick t counts the unobserved
/// ticks since the last observation, so a tick that follows an observation
/// has age 0. An observation fires at age k with probability hazard[k], and
/// the gap law describes the age at which the next observation fires.

/// Distribution of the renewal gap on {lower..upper}.
struct GapLaw {
  std::size_t lower = 1;
  std::size_t upper = 1;
  /// pmf[i] is the probability of gap lower + i.
  std::vector<double> pmf;

  static GapLaw uniform(std::size_t lower, std::size_t upper);
  static GapLaw point(std::size_t gap) { return uniform(gap, gap); }

  double prob(std::size_t gap) const {
    return (gap < lower || gap > upper) ? 0.0 : pmf[gap - lower];
  }
  void validate() const;
};

/// Per-age hazard h(k) for k in 0..U.
struct HazardModel {
  std::vector<double> hazard;

  std::size_t upper() const { return hazard.empty() ? 0 : hazard.size() - 1; }
  double at(std::size_t k) const { return k < hazard.size() ? hazard[k] : 1.0; }
  void validate() const;
};

/// Belief over ages 0..U.
struct AgeBelief {
  std::vector<double> alpha;

  static AgeBelief point(std::size_t age, std::size_t upper);
  std::size_t upper() const { return alpha.empty() ? 0 : alpha.size() - 1; }
};

/// Delayed feedback channel: a token about step t arrives at t + delay and
/// equals 1 with probability rho1 if step t was observed, rho0 otherwise.
struct TokenChannel {
  std::size_t delay = 1;
  double rho1 = 1.0;
  double rho0 = 0.0;

  static TokenChannel noiseless(std::size_t delay = 1) { return {delay, 1.0, 0.0}; }
  bool is_noiseless() const { return rho1 == 1.0 && rho0 == 0.0; }
  /// Noiseless with one-step delay: the age is exactly known every tick.
  bool reveals_age() const { return is_noiseless() && delay == 1; }
  void validate() const;
};

class FilterContradiction : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PendingToken {
  std::size_t due = 0;
  std::size_t about = 0;
  bool value = false;
};

/// Simulator-private monitor state.
struct MonitorState {
  std::size_t tick = 0;
  std::size_t age = 0;
  std::deque<PendingToken> pending;
};

struct MonitorTick {
  bool observed = false;
  std::size_t age_at_draw = 0;
  std::vector<PendingToken> tokens_due;
};

HazardModel uniform_hazard(std::size_t lower, std::size_t upper);
HazardModel hazard_from_gap_law(const GapLaw& law);
/// Inverse map: pmf[k] = h(k) prod_{j<k} (1 - h(j)).
GapLaw gap_law_from_hazard(const HazardModel& hazard);

/// One-step renewal prediction: out[0] = sum_k a_k h(k), out[k+1] = a_k (1 - h(k)).
AgeBelief belief_predict(const AgeBelief& belief, const HazardModel& hazard);

/// b-hat = sum_k a_k h(k).
double observation_probability(const AgeBelief& belief, const HazardModel& hazard);

/// Exact filter over (current age, observation bits of the last `delay`
/// ticks). The bits are what a lagged token is evidence about; the age
/// marginal is the renewal belief.
class LaggedBelief {
public:
  LaggedBelief(std::size_t upper, std::size_t delay);

  /// Start of an episode: age 0, the tick before the start was observed.
  static LaggedBelief initial(std::size_t upper, std::size_t delay);

  /// Arbitrary prior over (age, lagged-observed) for delay 1; used in tests.
  static LaggedBelief from_age_belief(const AgeBelief& ages, std::size_t delay);

  std::size_t upper() const { return upper_; }
  std::size_t delay() const { return delay_; }

  AgeBelief age_marginal() const;
  /// Probability that the step `delay` ticks back was observed.
  double lagged_observed_probability() const;
  double observation_probability(const HazardModel& hazard) const;

  void predict(const HazardModel& hazard);
  /// Bayes update with a token about the step `delay` ticks back.
  void token_update(const TokenChannel& channel, bool token);

  /// Exact age when the belief is a point mass; otherwise nullopt.
  std::optional<std::size_t> known_age(double tol = 1e-12) const;

  double mass(std::size_t age, std::uint32_t bits) const { return joint_[index(age, bits)]; }

private:
  std::size_t index(std::size_t age, std::uint32_t bits) const {
    return age * num_masks_ + bits;
  }
  void normalize();

  std::size_t upper_;
  std::size_t delay_;
  std::size_t num_masks_;
  std::vector<double> joint_;
};

/// Token update; `lag` must equal the channel delay. An absent token
/// (nullopt) leaves the belief unchanged.
LaggedBelief belief_token_update(const LaggedBelief& belief, const TokenChannel& channel,
                                 std::optional<bool> token, std::size_t lag);

/// Advances the monitor by one tick: releases tokens due now, draws the
/// observation for this tick from the hazard at the current age, schedules
/// the token about this tick.
MonitorTick simulate_monitor(MonitorState& state, const HazardModel& hazard,
                             const TokenChannel& channel, Rng& rng);

struct HazardEstimate {
  HazardModel hazard;
  /// Some age in {L..U} was never at risk; those entries fall back to the
  /// uniform-gap hazard.
  bool partial = true;
  /// Every age in {L..U} was at risk with a noiseless channel.
  bool exact = false;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
};

/// Estimates h from a noiseless token stream. `tokens[i]` is the token about
/// step i (the observation indicator). Add-one smoothing on {L..U}.
HazardEstimate estimate_hazard(std::span<const std::uint8_t> tokens, std::size_t lower,
                               std::size_t upper, const TokenChannel& channel);

}  // namespace tomdec
