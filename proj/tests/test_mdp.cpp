#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "tomdec/mdp.hpp"

using namespace tomdec;
using testing::two_cycle;

TEST_CASE("validate_mdp accepts a well-formed chain") {
  CHECK(validate_mdp(two_cycle()).empty());
}

TEST_CASE("validate_mdp names a transition row that does not sum to one") {
  TabularMdp m = two_cycle();
  m.p(1, 0, 0) = 0.9;
  const auto v = validate_mdp(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "transition[1][0]");
}

TEST_CASE("validate_mdp leaves rewards unconstrained") {
  TabularMdp m = two_cycle();
  m.r(0, 0) = -5.0;
  m.r(1, 0) = -0.25;
  CHECK(validate_mdp(m).empty());
}

TEST_CASE("state_marginals on a deterministic cycle") {
  const TabularMdp m = two_cycle();
  const auto prof = state_marginals(m, TabularPolicy::uniform(2, 1), 2);
  REQUIRE(prof.marginals.size() == 3);
  CHECK(prof.at(0) == std::vector<double>{1.0, 0.0});
  CHECK(prof.at(1) == std::vector<double>{0.0, 1.0});
  CHECK(prof.at(2) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("state_marginals with zero steps returns the initial distribution") {
  Rng rng(3);
  const TabularMdp m = testing::random_mdp(rng, 4, 2, 5);
  const auto prof = state_marginals(m, TabularPolicy::uniform(4, 2), 0);
  REQUIRE(prof.marginals.size() == 1);
  CHECK(prof.at(0) == m.initial);
}

TEST_CASE("state_marginals matches path enumeration") {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const TabularMdp m = testing::random_mdp(rng, 3, 2, 5);
    const TabularPolicy pi = rep == 0 ? TabularPolicy::uniform(3, 2) : testing::random_policy(rng, 3, 2);
    const auto prof = state_marginals(m, pi, 3);
    const auto oracle = testing::enumerate_marginals(m, pi, 3);
    for (std::size_t t = 0; t <= 3; ++t) {
      for (std::size_t s = 0; s < 3; ++s) CHECK(prof.at(t)[s] == doctest::Approx(oracle[t][s]).epsilon(1e-12));
    }
  }
}

TEST_CASE("state_marginals slices are distributions and satisfy the one-step recursion") {
  Rng rng(5);
  const TabularMdp m = testing::random_mdp(rng, 6, 3, 10);
  const TabularPolicy pi = testing::random_policy(rng, 6, 3);
  const auto prof = state_marginals(m, pi, 10);
  for (std::size_t t = 0; t <= 10; ++t) {
    double sum = 0.0;
    for (double x : prof.at(t)) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    if (t == 0) continue;
    for (std::size_t n = 0; n < 6; ++n) {
      double acc = 0.0;
      for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t a = 0; a < 3; ++a) acc += prof.at(t - 1)[s] * pi(s, a) * m.p(s, a, n);
      CHECK(prof.at(t)[n] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("state_marginals rejects a policy of the wrong shape") {
  CHECK_THROWS_AS(state_marginals(two_cycle(), TabularPolicy::uniform(3, 1), 1), DimensionError);
}

TEST_CASE("action_divergence") {
  TabularPolicy pi(1, 2), ref(1, 2);
  SUBCASE("identical rows give zero") {
    pi(0, 0) = ref(0, 0) = 0.3;
    pi(0, 1) = ref(0, 1) = 0.7;
    CHECK(action_divergence(pi, ref, 0) == 0.0);
  }
  SUBCASE("hand-evaluated two-point KL") {
    pi(0, 0) = 0.9;
    pi(0, 1) = 0.1;
    ref(0, 0) = ref(0, 1) = 0.5;
    const double expect = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
    CHECK(action_divergence(pi, ref, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(action_divergence(pi, ref, 0) == doctest::Approx(0.3681).epsilon(1e-4));
  }
  SUBCASE("zero reference mass under positive mass throws") {
    pi(0, 0) = 1.0;
    ref(0, 1) = 1.0;
    CHECK_THROWS_AS(action_divergence(pi, ref, 0), AbsoluteContinuityError);
  }
  SUBCASE("zero agent mass contributes nothing") {
    pi(0, 0) = 1.0;
    ref(0, 0) = 0.25;
    ref(0, 1) = 0.75;
    CHECK(action_divergence(pi, ref, 0) == doctest::Approx(std::log(4.0)));
  }
}

TEST_CASE("action_divergence is non-negative and zero only on equal rows") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const TabularPolicy p = testing::random_policy(rng, 1, 4, 0.0);
    const TabularPolicy q = testing::random_policy(rng, 1, 4, 0.01);
    CHECK(action_divergence(p, q, 0) > 0.0);
    CHECK(action_divergence(q, q, 0) == 0.0);
  }
}

TEST_CASE("rollout is deterministic") {
  SUBCASE("deterministic dynamics give one trace for every seed") {
    const TabularMdp m = two_cycle(5);
    const auto a = rollout(m, TabularPolicy::uniform(2, 1), 1);
    const auto b = rollout(m, TabularPolicy::uniform(2, 1), 999);
    REQUIRE(a.steps.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(a.steps[i].state == b.steps[i].state);
      CHECK(a.steps[i].state == i % 2);
    }
  }
  SUBCASE("same seed gives the same trace") {
    Rng rng(2);
    const TabularMdp m = testing::random_mdp(rng, 5, 3, 20);
    const TabularPolicy pi = testing::random_policy(rng, 5, 3);
    const auto a = rollout(m, pi, 42);
    const auto b = rollout(m, pi, 42);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      CHECK(a.steps[i].state == b.steps[i].state);
      CHECK(a.steps[i].action == b.steps[i].action);
      CHECK(a.steps[i].reward == b.steps[i].reward);
    }
  }
}

TEST_CASE("rollout visit frequencies match exact marginals") {
  TabularMdp m(2, 2, 4, 0.9);
  m.p(0, 0, 0) = 0.7;
  m.p(0, 0, 1) = 0.3;
  m.p(0, 1, 1) = 1.0;
  m.p(1, 0, 0) = 0.4;
  m.p(1, 0, 1) = 0.6;
  m.p(1, 1, 0) = 0.9;
  m.p(1, 1, 1) = 0.1;
  m.initial = {0.5, 0.5};
  m.index_successors();
  TabularPolicy pi(2, 2);
  pi(0, 0) = 0.6;
  pi(0, 1) = 0.4;
  pi(1, 0) = 0.2;
  pi(1, 1) = 0.8;
  const auto exact = state_marginals(m, pi, 3);
  const std::size_t n = 100000;
  std::vector<std::vector<double>> count(4, std::vector<double>(2, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto tr = rollout(m, pi, derive_seed(7, i));
    for (const auto& st : tr.steps) count[st.time][st.state] += 1.0;
  }
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t s = 0; s < 2; ++s) {
      const double p = exact.at(t)[s];
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
      CHECK(std::abs(count[t][s] / n - p) <= 3.0 * se);
    }
  }
}

TEST_CASE("discounted_return") {
  EpisodeTrace tr;
  CHECK(discounted_return(tr, 0.9) == 0.0);
  tr.steps = {{0, 0, 0, 0.0}, {1, 0, 0, 0.0}};
  CHECK(discounted_return(tr, 0.9) == 0.0);
  tr.steps = {{0, 0, 0, 1.0}, {1, 0, 0, 1.0}};
  CHECK(discounted_return(tr, 0.5) == doctest::Approx(1.5));
  tr.steps.clear();
  for (std::size_t t = 0; t < 300; ++t) tr.steps.push_back({t, 0, 0, 1.0});
  CHECK(discounted_return(tr, 0.95) <= 1.0 / (1.0 - 0.95));
}
