#include "tomdec/mdp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace tomdec {

namespace {

constexpr double kRowTolerance = 1e-9;

std::string fmt_row(StateId s, ActionId a) {
  std::ostringstream os;
  os << "transition[" << s << "][" << a << "]";
  return os.str();
}

}  // namespace

TabularMdp::TabularMdp(std::size_t states, std::size_t actions, std::size_t horizon_steps,
                       double gamma)
    : num_states(states),
      num_actions(actions),
      transition(states * actions * states, 0.0),
      reward(states * actions, 0.0),
      discount(gamma),
      initial(states, 0.0),
      horizon(horizon_steps),
      goal(states, false) {}

void TabularMdp::index_successors() {
  succ_.clear();
  succ_offset_.assign(num_states * num_actions + 1, 0);
  for (std::size_t sa = 0; sa < num_states * num_actions; ++sa) {
    succ_offset_[sa] = succ_.size();
    for (StateId n = 0; n < num_states; ++n) {
      const double q = transition[sa * num_states + n];
      if (q > 0.0) succ_.push_back({n, q});
    }
  }
  succ_offset_[num_states * num_actions] = succ_.size();
}

std::span<const TabularMdp::Successor> TabularMdp::successors(StateId s, ActionId a) const {
  if (succ_offset_.size() != num_states * num_actions + 1) {
    throw std::logic_error("TabularMdp::successors called before index_successors()");
  }
  const std::size_t sa = s * num_actions + a;
  return {succ_.data() + succ_offset_[sa], succ_offset_[sa + 1] - succ_offset_[sa]};
}

TabularPolicy::TabularPolicy(std::size_t states, std::size_t actions)
    : num_states(states), num_actions(actions), probs(states * actions, 0.0) {}

TabularPolicy TabularPolicy::uniform(std::size_t states, std::size_t actions) {
  TabularPolicy p(states, actions);
  std::fill(p.probs.begin(), p.probs.end(), 1.0 / static_cast<double>(actions));
  p.support_floor = 1.0 / static_cast<double>(actions);
  return p;
}

std::vector<Violation> validate_mdp(const TabularMdp& mdp) {
  std::vector<Violation> out;
  if (mdp.num_states == 0) out.push_back({"num_states", "must be positive"});
  if (mdp.num_actions == 0) out.push_back({"num_actions", "must be positive"});
  if (mdp.horizon == 0) out.push_back({"horizon", "must be positive"});
  if (!(mdp.discount >= 0.0 && mdp.discount < 1.0)) {
    out.push_back({"discount", "must lie in [0, 1)"});
  }
  if (mdp.transition.size() != mdp.num_states * mdp.num_actions * mdp.num_states) {
    out.push_back({"transition", "size does not match num_states*num_actions*num_states"});
    return out;
  }
  if (mdp.reward.size() != mdp.num_states * mdp.num_actions) {
    out.push_back({"reward", "size does not match num_states*num_actions"});
  }
  for (StateId s = 0; s < mdp.num_states; ++s) {
    for (ActionId a = 0; a < mdp.num_actions; ++a) {
      const auto row = mdp.row(s, a);
      double sum = 0.0;
      bool negative = false;
      for (double q : row) {
        negative = negative || q < 0.0 || !std::isfinite(q);
        sum += q;
      }
      if (negative) out.push_back({fmt_row(s, a), "negative or non-finite entry"});
      if (std::abs(sum - 1.0) > kRowTolerance) {
        std::ostringstream os;
        os << "row sums to " << sum << ", expected 1";
        out.push_back({fmt_row(s, a), os.str()});
      }
    }
  }
  if (mdp.initial.size() != mdp.num_states) {
    out.push_back({"initial", "size does not match num_states"});
  } else {
    double sum = 0.0;
    bool negative = false;
    for (double q : mdp.initial) {
      negative = negative || q < 0.0;
      sum += q;
    }
    if (negative) out.push_back({"initial", "negative entry"});
    if (std::abs(sum - 1.0) > kRowTolerance) out.push_back({"initial", "does not sum to 1"});
  }
  if (!mdp.goal.empty() && mdp.goal.size() != mdp.num_states) {
    out.push_back({"goal", "size does not match num_states"});
  }
  return out;
}

std::vector<Violation> validate_policy(const TabularPolicy& policy, std::size_t num_states,
                                       std::size_t num_actions) {
  std::vector<Violation> out;
  if (policy.num_states != num_states || policy.num_actions != num_actions ||
      policy.probs.size() != num_states * num_actions) {
    out.push_back({"policy", "dimensions do not match the mdp"});
    return out;
  }
  for (StateId s = 0; s < num_states; ++s) {
    double sum = 0.0;
    for (double q : policy.row(s)) {
      if (q < 0.0) out.push_back({"probs[" + std::to_string(s) + "]", "negative entry"});
      if (policy.full_support() && q < policy.support_floor - 1e-12) {
        out.push_back({"probs[" + std::to_string(s) + "]", "entry below declared support floor"});
      }
      sum += q;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      out.push_back({"probs[" + std::to_string(s) + "]", "row does not sum to 1"});
    }
  }
  return out;
}

OccupancyProfile state_marginals(const TabularMdp& mdp, const TabularPolicy& policy,
                                 std::size_t steps) {
  if (policy.num_states != mdp.num_states || policy.num_actions != mdp.num_actions) {
    throw DimensionError("state_marginals: policy shape does not match mdp");
  }
  OccupancyProfile prof;
  prof.marginals.reserve(steps + 1);
  prof.marginals.push_back(mdp.initial);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& cur = prof.marginals.back();
    std::vector<double> next(mdp.num_states, 0.0);
    for (StateId s = 0; s < mdp.num_states; ++s) {
      if (cur[s] == 0.0) continue;
      for (ActionId a = 0; a < mdp.num_actions; ++a) {
        const double w = cur[s] * policy(s, a);
        if (w == 0.0) continue;
        const auto row = mdp.row(s, a);
        for (StateId n = 0; n < mdp.num_states; ++n) next[n] += w * row[n];
      }
    }
    prof.marginals.push_back(std::move(next));
  }
  return prof;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      throw AbsoluteContinuityError("kl_divergence: reference has zero mass at index " +
                                    std::to_string(i));
    }
    acc += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can push exact-zero divergences slightly negative.
  return acc < 0.0 ? 0.0 : acc;
}

double action_divergence(const TabularPolicy& pi, const TabularPolicy& pi_ref, StateId state) {
  if (pi.num_actions != pi_ref.num_actions) {
    throw DimensionError("action_divergence: action counts differ");
  }
  return kl_divergence(pi.row(state), pi_ref.row(state));
}

std::size_t sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

EpisodeTrace rollout(const TabularMdp& mdp, const TabularPolicy& policy, std::uint64_t seed) {
  if (policy.num_states != mdp.num_states || policy.num_actions != mdp.num_actions) {
    throw DimensionError("rollout: policy shape does not match mdp");
  }
  Rng rng(seed);
  EpisodeTrace trace;
  StateId s = sample_index(mdp.initial, rng.uniform());
  for (std::size_t t = 0; t < mdp.horizon; ++t) {
    if (mdp.is_goal(s)) {
      trace.success = true;
      break;
    }
    const ActionId a = sample_index(policy.row(s), rng.uniform());
    trace.steps.push_back({t, s, a, mdp.r(s, a), false});
    s = sample_index(mdp.row(s, a), rng.uniform());
  }
  if (mdp.is_goal(s)) trace.success = true;
  return trace;
}

double discounted_return(const EpisodeTrace& trace, double discount) {
  double acc = 0.0;
  double w = 1.0;
  for (const auto& step : trace.steps) {
    acc += w * step.reward;
    w *= discount;
  }
  return acc;
}

}  // namespace tomdec
