#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "tomdec/augmented.hpp"
#include "tomdec/evidence.hpp"

using namespace tomdec;

TEST_CASE("build_state_ratio is zero when the policies agree") {
  Rng rng(1);
  const TabularMdp m = testing::random_mdp(rng, 4, 3, 6);
  const TabularPolicy pi = testing::random_policy(rng, 4, 3);
  const StateRatioTable r = build_state_ratio(m, pi, pi);
  for (double x : r.log_ratio) CHECK(x == 0.0);
  for (auto v : r.valid) CHECK(v == 1);
}

TEST_CASE("build_state_ratio masks and clips disjoint supports") {
  TabularMdp m(2, 2, 2, 0.9);
  for (StateId s = 0; s < 2; ++s) {
    m.p(s, 0, 0) = 1.0;
    m.p(s, 1, 1) = 1.0;
  }
  m.initial = {1.0, 0.0};
  m.index_successors();
  TabularPolicy pi(2, 2), ref(2, 2);
  pi(0, 1) = pi(1, 1) = 1.0;
  ref(0, 0) = ref(1, 0) = 1.0;
  const StateRatioTable r = build_state_ratio(m, pi, ref, 1e-12);
  CHECK_FALSE(r.is_valid(1, 1));
  CHECK(r.is_valid(1, 0));
  CHECK(r.is_clipped(1, 0));
  CHECK(r.at(1, 0) == doctest::Approx(std::log(1e-12)));
  CHECK(std::isfinite(r.at(1, 1)));
  CHECK_THROWS(observed_llr(pi, ref, r, 1, 1, 0));
}

TEST_CASE("build_state_ratio matches path enumeration") {
  Rng rng(12);
  for (int rep = 0; rep < 5; ++rep) {
    const TabularMdp m = testing::random_mdp(rng, 3, 2, 3);
    const TabularPolicy pi = testing::random_policy(rng, 3, 2);
    const TabularPolicy ref = testing::random_policy(rng, 3, 2);
    const StateRatioTable r = build_state_ratio(m, pi, ref);
    const auto dp = testing::enumerate_marginals(m, pi, 3);
    const auto dr = testing::enumerate_marginals(m, ref, 3);
    for (std::size_t t = 0; t <= 3; ++t) {
      for (StateId s = 0; s < 3; ++s) {
        CHECK(r.at(t, s) == doctest::Approx(std::log(dp[t][s] / dr[t][s])).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("tom_scalar") {
  CHECK(tom_scalar(0.0, 3.0, 2.0).psi == 0.0);
  CHECK(tom_scalar(1.0, 0.0, 0.0).psi == 0.0);
  CHECK(tom_scalar(0.5, 0.2, 0.6).psi == doctest::Approx(0.4));
  CHECK(tom_scalar(1.0, -0.5, 0.2).psi == doctest::Approx(-0.3));
}

TEST_CASE("tom_scalar is linear in b-hat") {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double b = rng.uniform(), c = rng.uniform();
    const double lr = rng.uniform() * 4 - 2, d = rng.uniform();
    CHECK(tom_scalar(c * b, lr, d).psi == doctest::Approx(c * tom_scalar(b, lr, d).psi).epsilon(1e-12));
  }
}

TEST_CASE("observed_llr") {
  StateRatioTable r;
  r.num_steps = 1;
  r.num_states = 1;
  r.log_ratio = {0.1};
  r.valid = {1};
  r.clipped = {0};
  TabularPolicy pi(1, 2), ref(1, 2);
  pi(0, 0) = 0.8;
  pi(0, 1) = 0.2;
  ref(0, 0) = 0.4;
  ref(0, 1) = 0.6;
  CHECK(observed_llr(pi, ref, r, 0, 0, 0) == doctest::Approx(0.1 + std::log(2.0)));
  CHECK(observed_llr(pi, ref, r, 0, 0, 0) == doctest::Approx(0.7931).epsilon(1e-4));
  SUBCASE("matching action probability leaves the state term") {
    pi(0, 1) = 0.6;
    pi(0, 0) = 0.4;
    CHECK(observed_llr(pi, ref, r, 0, 0, 1) == doctest::Approx(0.1));
  }
  SUBCASE("zero reference probability throws") {
    ref(0, 0) = 0.0;
    ref(0, 1) = 1.0;
    CHECK_THROWS(observed_llr(pi, ref, r, 0, 0, 0));
  }
}

TEST_CASE("compliant policy scores zero LLR everywhere") {
  Rng rng(3);
  const TabularMdp m = testing::random_mdp(rng, 5, 3, 4);
  const TabularPolicy ref = testing::random_policy(rng, 5, 3);
  const StateRatioTable r = build_state_ratio(m, ref, ref);
  for (std::size_t t = 0; t <= 4; ++t)
    for (StateId s = 0; s < 5; ++s)
      for (ActionId a = 0; a < 3; ++a) CHECK(observed_llr(ref, ref, r, t, s, a) == 0.0);
}

TEST_CASE("expected LLR given the state splits into log r plus Delta") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const TabularMdp m = testing::random_mdp(rng, 5, 3, 4);
    const TabularPolicy pi = testing::random_policy(rng, 5, 3, 0.0);
    const TabularPolicy ref = testing::random_policy(rng, 5, 3, 0.02);
    const StateRatioTable r = build_state_ratio(m, pi, ref);
    const auto dp = state_marginals(m, pi, 4);
    const auto dr = state_marginals(m, ref, 4);
    for (std::size_t t = 0; t <= 4; ++t) {
      double aggregate = 0.0, kl_states = 0.0, mean_delta = 0.0;
      for (StateId s = 0; s < 5; ++s) {
        double e = 0.0;
        for (ActionId a = 0; a < 3; ++a) {
          if (pi(s, a) > 0.0) e += pi(s, a) * observed_llr(pi, ref, r, t, s, a);
        }
        const double delta = action_divergence(pi, ref, s);
        CHECK(std::abs(e - (r.at(t, s) + delta)) <= 1e-9);
        aggregate += dp.at(t)[s] * e;
        kl_states += dp.at(t)[s] * std::log(dp.at(t)[s] / dr.at(t)[s]);
        mean_delta += dp.at(t)[s] * delta;
      }
      CHECK(std::abs(aggregate - (kl_states + mean_delta)) <= 1e-9);
      CHECK(aggregate >= -1e-12);
    }
  }
}

TEST_CASE("monitoring-aware ratio matches joint enumeration") {
  const testing::SmallInstance in;
  std::vector<std::vector<double>> dp(3, std::vector<double>(2, 0.0));
  testing::enumerate(in, [&](std::size_t t, StateId s, std::size_t, bool, ActionId, double p) { dp[t][s] += p; });
  const auto dr = state_marginals(in.mdp, in.ref, 3);
  const StateRatioTable r = build_state_ratio(in.mdp, in.pi, in.ref, in.model);
  for (std::size_t t = 0; t < 3; ++t)
    for (StateId s = 0; s < 2; ++s)
      CHECK(r.at(t, s) == doctest::Approx(std::log(dp[t][s] / dr.at(t)[s])).epsilon(1e-12));
}

TEST_CASE("expected_exposure matches the enumerated observed-trace KL") {
  const testing::SmallInstance in;
  const double gamma = 0.9;
  std::vector<std::vector<double>> dp(3, std::vector<double>(2, 0.0));
  testing::enumerate(in, [&](std::size_t t, StateId s, std::size_t, bool, ActionId, double p) { dp[t][s] += p; });
  const auto dr = state_marginals(in.mdp, in.ref, 3);
  double oracle = 0.0;
  testing::enumerate(in, [&](std::size_t t, StateId s, std::size_t k, bool o, ActionId a, double p) {
    if (!o) return;
    const double llr = std::log(dp[t][s] / dr.at(t)[s]) + std::log(in.pi.row(s, k)[a] / in.ref(s, a));
    oracle += p * std::pow(gamma, static_cast<double>(t)) * llr;
  });
  const MeanEstimate mc = expected_exposure(in.mdp, in.pi, in.ref, in.model, gamma, 10000, 5);
  CHECK(mc.samples == 10000);
  CHECK(std::abs(mc.mean - oracle) <= 2.0 * mc.stderr_);
  CHECK(oracle >= 0.0);
}

TEST_CASE("expected_exposure edge cases") {
  Rng rng(6);
  const TabularMdp m = testing::random_mdp(rng, 4, 2, 3);
  const TabularPolicy ref = testing::random_policy(rng, 4, 2);
  const MonitorModel model = MonitorModel::from_gap_law(GapLaw::uniform(1, 3), TokenChannel::noiseless());
  SUBCASE("compliant policy") {
    const MeanEstimate e = expected_exposure(m, ref, ref, model, 0.9, 2000, 1);
    CHECK(std::abs(e.mean) <= 2.0 * e.stderr_ + 1e-12);
  }
  SUBCASE("never observed within the horizon") {
    const MonitorModel late = MonitorModel::from_gap_law(GapLaw::uniform(5, 6), TokenChannel::noiseless());
    const TabularPolicy pi = testing::random_policy(rng, 4, 2);
    CHECK(expected_exposure(m, pi, ref, late, 0.9, 500, 2).mean == 0.0);
  }
  SUBCASE("zero episodes") {
    CHECK_THROWS_AS(expected_exposure(m, ref, ref, model, 0.9, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("realized_evidence") {
  const testing::SmallInstance in;
  const StateRatioTable r = build_state_ratio(in.mdp, in.pi, in.ref, in.model);
  SUBCASE("no observed steps") {
    EpisodeTrace tr;
    tr.steps = {{0, 0, 1, 0.0, false, 0}, {1, 1, 0, 0.0, false, 1}};
    const RealizedEvidence ev = realized_evidence(tr, in.pi, in.ref, r);
    CHECK(ev.value == 0.0);
    CHECK_FALSE(ev.clipped);
  }
  SUBCASE("sums the observed steps") {
    EpisodeTrace tr;
    tr.steps = {{0, 0, 1, 0.0, true, 0}, {1, 1, 0, 0.0, false, 0}, {2, 1, 1, 0.0, true, 1}};
    const double expect = r.at(0, 0) + std::log(in.pi.row(0, 0)[1] / in.ref(0, 1)) + r.at(2, 1) +
                          std::log(in.pi.row(1, 1)[1] / in.ref(1, 1));
    CHECK(realized_evidence(tr, in.pi, in.ref, r).value == doctest::Approx(expect));
  }
  SUBCASE("mean realized evidence equals mean exposure") {
    Rng rng(44);
    double sr = 0, sr2 = 0, sp = 0, sp2 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const ScoredEpisode ep = run_scored_episode(in.mdp, in.pi, in.ref, in.model, r, rng);
      const double x = realized_evidence(ep.trace, in.pi, in.ref, r).value;
      double y = 0.0;
      for (const auto& e : ep.evidence) y += e.psi;
      sr += x;
      sr2 += x * x;
      sp += y;
      sp2 += y * y;
    }
    const double mr = sr / n, mp = sp / n;
    const double var_r = (sr2 / n - mr * mr) / n, var_p = (sp2 / n - mp * mp) / n;
    CHECK(std::abs(mr - mp) <= 2.0 * std::sqrt(var_r + var_p));
  }
}

TEST_CASE("compliant realized evidence averages to zero") {
  Rng rng(7);
  const TabularMdp m = testing::random_mdp(rng, 4, 3, 6);
  const TabularPolicy ref = testing::random_policy(rng, 4, 3);
  const MonitorModel model = MonitorModel::from_gap_law(GapLaw::uniform(1, 2), TokenChannel::noiseless());
  const AugmentedPolicy pi = AugmentedPolicy::lift(ref, 1);
  const StateRatioTable r = build_state_ratio(m, pi, ref, model);
  for (int i = 0; i < 200; ++i) {
    const ScoredEpisode ep = run_scored_episode(m, pi, ref, model, r, rng);
    CHECK(realized_evidence(ep.trace, pi, ref, r).value == 0.0);
  }
}

TEST_CASE("exposure ledger") {
  ExposureLedger led(0.5, 0.9);
  led.add(tom_scalar(1.0, 1.0, 0.0));
  CHECK(led.ema() == 1.0);
  led.add(tom_scalar(1.0, 3.0, 0.0));
  CHECK(led.ema() == doctest::Approx(2.0));
  CHECK(led.discounted_sum() == doctest::Approx(1.0 + 0.9 * 3.0));
  led.begin_episode();
  CHECK(led.discounted_sum() == 0.0);
  CHECK(led.ema() == doctest::Approx(2.0));
}
