#include <cmath>
#include <deque>
#include <limits>

#include "doctest.h"
#include "tomdec/baselines.hpp"
#include "tomdec/environments.hpp"

using namespace tomdec;

namespace {

// Forward BFS over the four planar moves plus vertical moves when stacked.
std::vector<std::size_t> bfs_from(const ScenarioSpec& spec, const Cell& from) {
  const std::size_t n = spec.size, layers = spec.layers;
  std::vector<std::size_t> dist(layers * n * n, std::numeric_limits<std::size_t>::max());
  auto id = [&](const Cell& c) { return (c.layer * n + c.row) * n + c.col; };
  std::deque<Cell> q{from};
  dist[id(from)] = 0;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    std::vector<Cell> next;
    if (c.row > 0) next.push_back({c.row - 1, c.col, c.layer});
    if (c.row + 1 < n) next.push_back({c.row + 1, c.col, c.layer});
    if (c.col > 0) next.push_back({c.row, c.col - 1, c.layer});
    if (c.col + 1 < n) next.push_back({c.row, c.col + 1, c.layer});
    if (c.layer > 0) next.push_back({c.row, c.col, c.layer - 1});
    if (c.layer + 1 < layers) next.push_back({c.row, c.col, c.layer + 1});
    for (const auto& x : next) {
      if (dist[id(x)] == std::numeric_limits<std::size_t>::max()) {
        dist[id(x)] = dist[id(c)] + 1;
        q.push_back(x);
      }
    }
  }
  return dist;
}

void check_common(const Scenario& sc) {
  CHECK(validate_mdp(sc.mdp).empty());
  CHECK(validate_policy(sc.reference, sc.mdp.num_states, sc.mdp.num_actions).empty());
  CHECK(sc.reference.full_support());
  CHECK(sc.reference.support_floor == sc.spec.floor);
  for (StateId s = 0; s < sc.mdp.num_states; ++s) {
    double sum = 0.0, lo = 1.0;
    for (ActionId a = 0; a < sc.mdp.num_actions; ++a) {
      sum += sc.reference(s, a);
      lo = std::min(lo, sc.reference(s, a));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lo == sc.spec.floor);
  }
  // Goal reachable from every start within the horizon.
  for (const auto& start : sc.spec.starts) {
    const auto dist = bfs_from(sc.spec, start);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& g : sc.spec.goals) best = std::min(best, dist[sc.spec.state_of(g)]);
    CHECK(best <= sc.spec.horizon);
  }
}

}  // namespace

TEST_CASE("perimeter lap construction") {
  const Scenario sc = build_perimeter_lap(8, 0.01);
  check_common(sc);
  CHECK(sc.mdp.num_actions == 5);
  CHECK(sc.spec.horizon == 80);
  // Every start is on the route and the reference walks it clockwise.
  for (const auto& c : sc.spec.starts) CHECK(in_zone(sc.spec, c));
  const StateId corner = sc.spec.state_of({0, 0, 0});
  CHECK(sc.reference(corner, kRight) == doctest::Approx(0.96));
  CHECK(sc.reference(sc.spec.state_of({0, 7, 0}), kDown) == doctest::Approx(0.96));
  CHECK(sc.reference(sc.spec.state_of({7, 7, 0}), kLeft) == doctest::Approx(0.96));
  CHECK(sc.reference(sc.spec.state_of({7, 0, 0}), kUp) == doctest::Approx(0.96));
  // The goal is off the route.
  for (const auto& g : sc.spec.goals) CHECK_FALSE(in_zone(sc.spec, g));
}

TEST_CASE("goal_distance agrees with a breadth-first search") {
  for (const Scenario& sc : {build_perimeter_lap(8, 0.01), build_avoid_zone(8, 0.01),
                             build_avoid_zone(6, 0.02, 3)}) {
    std::size_t worst = 0;
    for (const auto& start : sc.spec.starts) {
      const auto dist = bfs_from(sc.spec, start);
      std::size_t best = std::numeric_limits<std::size_t>::max();
      for (const auto& g : sc.spec.goals) best = std::min(best, dist[sc.spec.state_of(g)]);
      worst = std::max(worst, best);
    }
    CHECK(goal_distance(sc.spec) == worst);
  }
}

TEST_CASE("reference rollouts stay on the perimeter") {
  const Scenario sc = build_perimeter_lap(8, 0.01);
  const std::size_t n = 20000;
  std::size_t stayed = 0, reached = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const EpisodeTrace tr = rollout(sc.mdp, sc.reference, derive_seed(3, i));
    bool on = true;
    for (const auto& st : tr.steps) on = on && in_zone(sc.spec, sc.spec.cell_of(st.state));
    stayed += on ? 1 : 0;
    reached += tr.success ? 1 : 0;
  }
  const double bound = std::pow(1.0 - 4.0 * 0.01, 80.0);
  const double p = static_cast<double>(stayed) / n;
  CHECK(p >= bound - 3.0 * std::sqrt(bound * (1.0 - bound) / n));
  // The interior goal is essentially never reached by following the route.
  CHECK(static_cast<double>(reached) / n < 0.02);
}

TEST_CASE("avoid zone construction") {
  const Scenario sc = build_avoid_zone(8, 0.01);
  check_common(sc);
  for (const auto& g : sc.spec.goals) CHECK(in_zone(sc.spec, g));
  for (const auto& s : sc.spec.starts) CHECK_FALSE(in_zone(sc.spec, s));
  // Quadrant-entering actions from outside carry exactly the floor.
  std::size_t boundary = 0;
  for (StateId s = 0; s < sc.mdp.num_states; ++s) {
    const Cell c = sc.spec.cell_of(s);
    if (in_zone(sc.spec, c)) continue;
    for (ActionId a = 0; a < sc.mdp.num_actions; ++a) {
      StateId next = 0;
      for (StateId x = 0; x < sc.mdp.num_states; ++x) if (sc.mdp.p(s, a, x) == 1.0) next = x;
      if (in_zone(sc.spec, sc.spec.cell_of(next))) {
        ++boundary;
        CHECK(sc.reference(s, a) == 0.01);
        // A shortest-path agent taking this action pays at least this much.
        const double delta = std::log(1.0 / 0.01);
        CHECK(delta >= std::log((1.0 - 4 * 0.01) / 0.01));
      }
    }
  }
  CHECK(boundary > 0);
}

TEST_CASE("stacked avoid zone") {
  const Scenario sc = build_avoid_zone(6, 0.02, 3);
  check_common(sc);
  CHECK(sc.mdp.num_actions == 7);
  CHECK(sc.mdp.num_states == 108);
}

TEST_CASE("selfish policy crosses the forbidden quadrant and reaches the goal") {
  const Scenario sc = build_avoid_zone(8, 0.01);
  const MonitorModel model = MonitorModel::from_gap_law(GapLaw::uniform(1, 9), TokenChannel::noiseless());
  LearnerConfig cfg;
  cfg.episodes = 3000;
  const TrainResult res = selfish(sc.mdp, sc.reference, model, cfg);
  StateId s = sc.spec.state_of(sc.spec.starts.front());
  bool crossed = false;
  std::size_t steps = 0;
  while (!sc.mdp.is_goal(s) && steps < sc.spec.horizon) {
    const ActionId a = greedy_action(res.policy.row(s, 0));
    StateId next = s;
    for (StateId x = 0; x < sc.mdp.num_states; ++x) {
      if (sc.mdp.p(s, a, x) == 1.0) next = x;
    }
    s = next;
    crossed = crossed || in_zone(sc.spec, sc.spec.cell_of(s));
    ++steps;
  }
  CHECK(sc.mdp.is_goal(s));
  CHECK(crossed);
  CHECK(steps == goal_distance(sc.spec));
}

TEST_CASE("invalid scenario parameters") {
  CHECK_THROWS_AS(build_perimeter_lap(3, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(build_perimeter_lap(8, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_perimeter_lap(8, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_avoid_zone(2, 0.01), std::invalid_argument);
  ScenarioSpec spec = perimeter_lap_spec(8, 0.01);
  spec.horizon = 2;
  CHECK_THROWS_AS(build_scenario(spec), std::invalid_argument);
  spec = avoid_zone_spec(8, 0.01);
  spec.goals.clear();
  CHECK_THROWS_AS(build_scenario(spec), std::invalid_argument);
  spec = avoid_zone_spec(8, 0.01);
  spec.kind = "maze";
  CHECK_THROWS_AS(build_scenario(spec), std::invalid_argument);
}
