#include "tomdec/monitoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tomdec {

GapLaw GapLaw::uniform(std::size_t lower, std::size_t upper) {
  if (lower < 1 || upper < lower) {
    throw std::invalid_argument("GapLaw::uniform: need 1 <= L <= U");
  }
  GapLaw law;
  law.lower = lower;
  law.upper = upper;
  law.pmf.assign(upper - lower + 1, 1.0 / static_cast<double>(upper - lower + 1));
  return law;
}

void GapLaw::validate() const {
  if (lower < 1 || upper < lower) throw std::invalid_argument("GapLaw: need 1 <= L <= U");
  if (pmf.size() != upper - lower + 1) {
    throw std::invalid_argument("GapLaw: pmf must have U - L + 1 entries");
  }
  double sum = 0.0;
  for (double q : pmf) {
    if (q < 0.0) throw std::invalid_argument("GapLaw: negative pmf entry");
    sum += q;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("GapLaw: pmf does not sum to 1");
}

void HazardModel::validate() const {
  if (hazard.empty()) throw std::invalid_argument("HazardModel: empty");
  for (double h : hazard) {
    if (!(h >= 0.0 && h <= 1.0)) throw std::invalid_argument("HazardModel: entry outside [0,1]");
  }
  if (hazard.back() != 1.0) throw std::invalid_argument("HazardModel: hazard[U] must be 1");
}

void TokenChannel::validate() const {
  if (delay < 1) throw std::invalid_argument("TokenChannel: delay must be >= 1");
  if (delay > 16) throw std::invalid_argument("TokenChannel: delay above 16 is not supported");
  if (!(rho1 > 0.0 && rho1 <= 1.0)) throw std::invalid_argument("TokenChannel: rho1 in (0,1]");
  if (!(rho0 >= 0.0 && rho0 < rho1)) throw std::invalid_argument("TokenChannel: need 0 <= rho0 < rho1");
}

AgeBelief AgeBelief::point(std::size_t age, std::size_t upper) {
  AgeBelief b;
  b.alpha.assign(upper + 1, 0.0);
  b.alpha.at(age) = 1.0;
  return b;
}

HazardModel uniform_hazard(std::size_t lower, std::size_t upper) {
  if (lower < 1 || upper < lower) throw std::invalid_argument("uniform_hazard: need 1 <= L <= U");
  HazardModel h;
  h.hazard.assign(upper + 1, 0.0);
  for (std::size_t k = lower; k <= upper; ++k) {
    h.hazard[k] = 1.0 / static_cast<double>(upper - k + 1);
  }
  return h;
}

HazardModel hazard_from_gap_law(const GapLaw& law) {
  law.validate();
  HazardModel h;
  h.hazard.assign(law.upper + 1, 0.0);
  double survival = 1.0;  // sum_{j >= k} pmf[j]
  for (std::size_t k = law.lower; k <= law.upper; ++k) {
    const double p = law.prob(k);
    h.hazard[k] = survival > 0.0 ? std::clamp(p / survival, 0.0, 1.0) : 1.0;
    survival -= p;
  }
  h.hazard[law.upper] = 1.0;
  return h;
}

GapLaw gap_law_from_hazard(const HazardModel& hazard) {
  hazard.validate();
  std::size_t lower = 0;
  while (lower < hazard.upper() && hazard.hazard[lower] == 0.0) ++lower;
  if (lower == 0) throw std::invalid_argument("gap_law_from_hazard: hazard[0] must be 0");
  GapLaw law;
  law.lower = lower;
  law.upper = hazard.upper();
  law.pmf.assign(law.upper - lower + 1, 0.0);
  double survive = 1.0;
  for (std::size_t k = 0; k <= law.upper; ++k) {
    const double fire = survive * hazard.hazard[k];
    if (k >= lower) law.pmf[k - lower] = fire;
    survive -= fire;
  }
  return law;
}

AgeBelief belief_predict(const AgeBelief& belief, const HazardModel& hazard) {
  if (belief.alpha.size() != hazard.hazard.size()) {
    throw std::invalid_argument("belief_predict: belief and hazard sizes differ");
  }
  const std::size_t u = hazard.upper();
  AgeBelief out;
  out.alpha.assign(u + 1, 0.0);
  for (std::size_t k = 0; k <= u; ++k) {
    const double a = belief.alpha[k];
    out.alpha[0] += a * hazard.hazard[k];
    if (k < u) out.alpha[k + 1] += a * (1.0 - hazard.hazard[k]);
  }
  const double total = std::accumulate(out.alpha.begin(), out.alpha.end(), 0.0);
  if (total > 0.0 && std::abs(total - 1.0) > 1e-12) {
    for (double& a : out.alpha) a /= total;
  }
  return out;
}

double observation_probability(const AgeBelief& belief, const HazardModel& hazard) {
  if (belief.alpha.size() != hazard.hazard.size()) {
    throw std::invalid_argument("observation_probability: belief and hazard sizes differ");
  }
  double b = 0.0;
  for (std::size_t k = 0; k < belief.alpha.size(); ++k) b += belief.alpha[k] * hazard.hazard[k];
  return std::clamp(b, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// LaggedBelief

LaggedBelief::LaggedBelief(std::size_t upper, std::size_t delay)
    : upper_(upper), delay_(delay), num_masks_(std::size_t{1} << delay) {
  if (delay < 1 || delay > 16) throw std::invalid_argument("LaggedBelief: delay must be in 1..16");
  joint_.assign((upper + 1) * num_masks_, 0.0);
}

LaggedBelief LaggedBelief::initial(std::size_t upper, std::size_t delay) {
  LaggedBelief b(upper, delay);
  // Age 0 at t=0 means tick -1 was observed; older bits refer to steps
  // before the episode and are never queried.
  b.joint_[b.index(0, 1u)] = 1.0;
  return b;
}

LaggedBelief LaggedBelief::from_age_belief(const AgeBelief& ages, std::size_t delay) {
  LaggedBelief b(ages.upper(), delay);
  for (std::size_t k = 0; k <= ages.upper(); ++k) {
    // With delay 1 the lagged bit is exactly "age == 0".
    b.joint_[b.index(k, k == 0 ? 1u : 0u)] = ages.alpha[k];
  }
  b.normalize();
  return b;
}

AgeBelief LaggedBelief::age_marginal() const {
  AgeBelief out;
  out.alpha.assign(upper_ + 1, 0.0);
  for (std::size_t k = 0; k <= upper_; ++k) {
    for (std::uint32_t m = 0; m < num_masks_; ++m) out.alpha[k] += joint_[index(k, m)];
  }
  return out;
}

double LaggedBelief::lagged_observed_probability() const {
  const std::uint32_t bit = 1u << (delay_ - 1);
  double p = 0.0;
  for (std::size_t k = 0; k <= upper_; ++k) {
    for (std::uint32_t m = 0; m < num_masks_; ++m) {
      if (m & bit) p += joint_[index(k, m)];
    }
  }
  return p;
}

double LaggedBelief::observation_probability(const HazardModel& hazard) const {
  return tomdec::observation_probability(age_marginal(), hazard);
}

void LaggedBelief::predict(const HazardModel& hazard) {
  if (hazard.upper() != upper_) throw std::invalid_argument("LaggedBelief::predict: U mismatch");
  const std::uint32_t keep = static_cast<std::uint32_t>(num_masks_ - 1);
  std::vector<double> next(joint_.size(), 0.0);
  for (std::size_t k = 0; k <= upper_; ++k) {
    const double h = hazard.hazard[k];
    for (std::uint32_t m = 0; m < num_masks_; ++m) {
      const double w = joint_[index(k, m)];
      if (w == 0.0) continue;
      next[index(0, ((m << 1) | 1u) & keep)] += w * h;
      if (k < upper_) next[index(k + 1, (m << 1) & keep)] += w * (1.0 - h);
    }
  }
  joint_ = std::move(next);
  normalize();
}

void LaggedBelief::token_update(const TokenChannel& channel, bool token) {
  if (channel.delay != delay_) {
    throw std::invalid_argument("LaggedBelief::token_update: channel delay mismatch");
  }
  const std::uint32_t bit = 1u << (delay_ - 1);
  const double like_obs = token ? channel.rho1 : 1.0 - channel.rho1;
  const double like_unobs = token ? channel.rho0 : 1.0 - channel.rho0;
  double total = 0.0;
  for (std::size_t k = 0; k <= upper_; ++k) {
    for (std::uint32_t m = 0; m < num_masks_; ++m) {
      double& w = joint_[index(k, m)];
      w *= (m & bit) ? like_obs : like_unobs;
      total += w;
    }
  }
  if (!(total > 0.0)) {
    throw FilterContradiction("token contradicts every hypothesis with positive belief");
  }
  for (double& w : joint_) w /= total;
}

std::optional<std::size_t> LaggedBelief::known_age(double tol) const {
  const AgeBelief a = age_marginal();
  for (std::size_t k = 0; k <= upper_; ++k) {
    if (a.alpha[k] >= 1.0 - tol) return k;
  }
  return std::nullopt;
}

void LaggedBelief::normalize() {
  const double total = std::accumulate(joint_.begin(), joint_.end(), 0.0);
  if (total > 0.0) {
    for (double& w : joint_) w /= total;
  }
}

LaggedBelief belief_token_update(const LaggedBelief& belief, const TokenChannel& channel,
                                 std::optional<bool> token, std::size_t lag) {
  if (lag != channel.delay) {
    throw std::invalid_argument("belief_token_update: step lag must equal the channel delay");
  }
  LaggedBelief out = belief;
  if (token) out.token_update(channel, *token);
  return out;
}

// ---------------------------------------------------------------------------

MonitorTick simulate_monitor(MonitorState& state, const HazardModel& hazard,
                             const TokenChannel& channel, Rng& rng) {
  MonitorTick out;
  while (!state.pending.empty() && state.pending.front().due == state.tick) {
    out.tokens_due.push_back(state.pending.front());
    state.pending.pop_front();
  }
  out.age_at_draw = state.age;
  out.observed = rng.bernoulli(hazard.at(state.age));
  const bool token = rng.bernoulli(out.observed ? channel.rho1 : channel.rho0);
  state.pending.push_back({state.tick + channel.delay, state.tick, token});
  state.age = out.observed ? 0 : state.age + 1;
  ++state.tick;
  return out;
}

HazardEstimate estimate_hazard(std::span<const std::uint8_t> tokens, std::size_t lower,
                               std::size_t upper, const TokenChannel& channel) {
  if (!channel.is_noiseless()) {
    throw std::invalid_argument("estimate_hazard: only noiseless channels are supported");
  }
  if (lower < 1 || upper < lower) throw std::invalid_argument("estimate_hazard: need 1 <= L <= U");
  HazardEstimate est;
  est.at_risk.assign(upper + 1, 0);
  est.events.assign(upper + 1, 0);
  std::size_t age = 0;
  for (std::uint8_t y : tokens) {
    if (age > upper) {
      throw std::invalid_argument("estimate_hazard: token stream exceeds the upper gap bound");
    }
    ++est.at_risk[age];
    if (y) {
      ++est.events[age];
      age = 0;
    } else {
      ++age;
    }
  }
  const HazardModel prior = uniform_hazard(lower, upper);
  est.hazard.hazard.assign(upper + 1, 0.0);
  bool partial = false;
  for (std::size_t k = lower; k < upper; ++k) {
    if (est.at_risk[k] == 0) {
      partial = true;
      est.hazard.hazard[k] = prior.hazard[k];
    } else {
      est.hazard.hazard[k] = (static_cast<double>(est.events[k]) + 1.0) /
                             (static_cast<double>(est.at_risk[k]) + 2.0);
    }
  }
  if (est.at_risk[upper] == 0) partial = true;
  est.hazard.hazard[upper] = 1.0;
  est.partial = partial;
  est.exact = !partial;
  return est;
}

}  // namespace tomdec
