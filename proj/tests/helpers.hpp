#pragma once

// Small fixtures and brute-force oracles shared by the unit suites.

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <functional>
#include <vector>

#include "tomdec/augmented.hpp"
#include "tomdec/mdp.hpp"
#include "tomdec/random.hpp"

namespace testing {

using tomdec::Rng;
using tomdec::TabularMdp;
using tomdec::TabularPolicy;

inline std::vector<double> random_simplex(Rng& rng, std::size_t n, double min_entry = 0.0) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform()) + min_entry;
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

inline TabularMdp random_mdp(Rng& rng, std::size_t states, std::size_t actions,
                             std::size_t horizon, double discount = 0.9) {
  TabularMdp m(states, actions, horizon, discount);
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < actions; ++a) {
      const auto row = random_simplex(rng, states);
      for (std::size_t n = 0; n < states; ++n) m.p(s, a, n) = row[n];
      m.r(s, a) = rng.uniform() * 2.0 - 1.0;
    }
  }
  m.initial = random_simplex(rng, states);
  m.index_successors();
  return m;
}

inline TabularPolicy random_policy(Rng& rng, std::size_t states, std::size_t actions,
                                   double min_entry = 0.05) {
  TabularPolicy p(states, actions);
  for (std::size_t s = 0; s < states; ++s) {
    const auto row = random_simplex(rng, actions, min_entry);
    for (std::size_t a = 0; a < actions; ++a) p(s, a) = row[a];
  }
  return p;
}

/// Deterministic two-state cycle s0 -> s1 -> s0 with one action.
inline TabularMdp two_cycle(std::size_t horizon = 4) {
  TabularMdp m(2, 1, horizon, 0.9);
  m.p(0, 0, 1) = 1.0;
  m.p(1, 0, 0) = 1.0;
  m.initial = {1.0, 0.0};
  m.index_successors();
  return m;
}

/// Time-t state marginals by summing the probability of every path of
/// (state, action, next state) choices; exponential, for tiny instances only.
inline std::vector<std::vector<double>> enumerate_marginals(const TabularMdp& m,
                                                            const TabularPolicy& pi,
                                                            std::size_t steps) {
  std::vector<std::vector<double>> out(steps + 1, std::vector<double>(m.num_states, 0.0));
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t t,
                                                                   std::size_t s, double p) {
    out[t][s] += p;
    if (t == steps) return;
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      for (std::size_t n = 0; n < m.num_states; ++n) {
        const double q = p * pi(s, a) * m.p(s, a, n);
        if (q > 0.0) walk(t + 1, n, q);
      }
    }
  };
  for (std::size_t s = 0; s < m.num_states; ++s) {
    if (m.initial[s] > 0.0) walk(0, s, m.initial[s]);
  }
  return out;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

// States 0..3 on a line; actions left, right, stay. Entering state 3 ends
// the episode with reward 1. The reference leans left.
struct Line {
  TabularMdp mdp{4, 3, 10, 0.95};
  TabularPolicy ref{4, 3};

  explicit Line(bool rewarded) {
    for (std::size_t s = 0; s < 4; ++s) {
      mdp.p(s, 0, s == 0 ? 0 : s - 1) = 1.0;
      mdp.p(s, 1, std::min<std::size_t>(3, s + 1)) = 1.0;
      mdp.p(s, 2, s) = 1.0;
      for (std::size_t a = 0; a < 3; ++a) mdp.r(s, a) = rewarded ? -0.01 : 0.0;
      ref(s, 0) = 0.8;
      ref(s, 1) = 0.1;
      ref(s, 2) = 0.1;
    }
    if (rewarded) {
      mdp.r(2, 1) = 1.0;
      mdp.goal[3] = true;
    }
    mdp.initial = {1.0, 0.0, 0.0, 0.0};
    mdp.index_successors();
  }
};

// Two states, two actions, three steps, monitored with gaps on {1, 2}; the
// acting rule depends on the age so the state marginals depend on the
// observation schedule.
struct SmallInstance {
  TabularMdp mdp{2, 2, 3, 0.9};
  TabularPolicy ref{2, 2};
  tomdec::AugmentedPolicy pi;
  tomdec::MonitorModel model = tomdec::MonitorModel::from_gap_law(
      tomdec::GapLaw::uniform(1, 2), tomdec::TokenChannel::noiseless());

  SmallInstance() {
    mdp.p(0, 0, 0) = 0.8;
    mdp.p(0, 0, 1) = 0.2;
    mdp.p(0, 1, 0) = 0.3;
    mdp.p(0, 1, 1) = 0.7;
    mdp.p(1, 0, 0) = 0.6;
    mdp.p(1, 0, 1) = 0.4;
    mdp.p(1, 1, 0) = 0.1;
    mdp.p(1, 1, 1) = 0.9;
    mdp.initial = {0.7, 0.3};
    mdp.index_successors();
    ref(0, 0) = 0.9;
    ref(0, 1) = 0.1;
    ref(1, 0) = 0.75;
    ref(1, 1) = 0.25;
    pi = tomdec::AugmentedPolicy(2, 3, 2);
    const double p1[2][3] = {{0.2, 0.5, 0.95}, {0.4, 0.6, 0.9}};  // P(action 0 | s, age)
    for (tomdec::StateId s = 0; s < 2; ++s) {
      for (std::size_t k = 0; k < 3; ++k) {
        pi.row(s, k)[0] = p1[s][k];
        pi.row(s, k)[1] = 1.0 - p1[s][k];
      }
    }
  }
};

// Enumerates every (state, age, observation, action) path.
using PathVisitor = std::function<void(std::size_t t, tomdec::StateId s, std::size_t k, bool o,
                                       tomdec::ActionId a, double p)>;

inline void enumerate(const SmallInstance& in, const PathVisitor& visit) {
  const auto& h = in.model.hazard.hazard;
  std::function<void(std::size_t, tomdec::StateId, std::size_t, double)> walk =
      [&](std::size_t t, tomdec::StateId s, std::size_t k, double p) {
        if (t == in.mdp.horizon) return;
        for (int o = 0; o < 2; ++o) {
          const double po = o ? h[k] : 1.0 - h[k];
          if (po == 0.0) continue;
          for (tomdec::ActionId a = 0; a < 2; ++a) {
            const double pa = p * po * in.pi.row(s, k)[a];
            visit(t, s, k, o != 0, a, pa);
            for (tomdec::StateId n = 0; n < 2; ++n) {
              if (in.mdp.p(s, a, n) > 0.0) walk(t + 1, n, o ? 0 : k + 1, pa * in.mdp.p(s, a, n));
            }
          }
        }
      };
  for (tomdec::StateId s = 0; s < 2; ++s) walk(0, s, 0, in.mdp.initial[s]);
}

}  // namespace testing
