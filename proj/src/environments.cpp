#include "tomdec/environments.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>

namespace tomdec {

namespace {

Cell apply_move(const ScenarioSpec& spec, const Cell& c, ActionId a) {
  Cell n = c;
  switch (a) {
    case kUp:
      if (c.row > 0) --n.row;
      break;
    case kRight:
      if (c.col + 1 < spec.size) ++n.col;
      break;
    case kDown:
      if (c.row + 1 < spec.size) ++n.row;
      break;
    case kLeft:
      if (c.col > 0) --n.col;
      break;
    case kAscend:
      if (c.layer + 1 < spec.layers) ++n.layer;
      break;
    case kDescend:
      if (c.layer > 0) --n.layer;
      break;
    default:
      break;
  }
  return n;
}

bool is_goal_cell(const ScenarioSpec& spec, const Cell& c) {
  return std::find(spec.goals.begin(), spec.goals.end(), c) != spec.goals.end();
}

bool on_perimeter(std::size_t n, const Cell& c) {
  return c.row == 0 || c.col == 0 || c.row + 1 == n || c.col + 1 == n;
}

ActionId perimeter_action(std::size_t n, const Cell& c) {
  if (on_perimeter(n, c)) {
    if (c.row == 0 && c.col + 1 < n) return kRight;
    if (c.col + 1 == n && c.row + 1 < n) return kDown;
    if (c.row + 1 == n && c.col > 0) return kLeft;
    return kUp;
  }
  const std::size_t dist[4] = {c.row, n - 1 - c.col, n - 1 - c.row, c.col};
  return static_cast<ActionId>(std::min_element(dist, dist + 4) - dist);
}

TabularPolicy smoothed(const std::vector<ActionId>& intended, std::size_t actions, double floor) {
  TabularPolicy pi(intended.size(), actions);
  const double top = 1.0 - static_cast<double>(actions - 1) * floor;
  for (StateId s = 0; s < intended.size(); ++s) {
    for (ActionId a = 0; a < actions; ++a) pi(s, a) = (a == intended[s]) ? top : floor;
  }
  pi.support_floor = floor;
  return pi;
}

TabularMdp grid_mdp(const ScenarioSpec& spec) {
  const std::size_t states = spec.layers * spec.size * spec.size;
  const std::size_t actions = spec.num_actions();
  TabularMdp mdp(states, actions, spec.horizon, spec.discount);
  mdp.goal.assign(states, false);
  for (StateId s = 0; s < states; ++s) {
    const Cell c = spec.cell_of(s);
    const bool goal = is_goal_cell(spec, c);
    mdp.goal[s] = goal;
    for (ActionId a = 0; a < actions; ++a) {
      if (goal) {
        mdp.p(s, a, s) = 1.0;
        mdp.r(s, a) = 0.0;
        continue;
      }
      const Cell nx = apply_move(spec, c, a);
      mdp.p(s, a, spec.state_of(nx)) = 1.0;
      mdp.r(s, a) = spec.step_penalty + (is_goal_cell(spec, nx) ? spec.goal_reward : 0.0);
    }
  }
  std::fill(mdp.initial.begin(), mdp.initial.end(), 0.0);
  for (const auto& c : spec.starts) {
    mdp.initial[spec.state_of(c)] += 1.0 / static_cast<double>(spec.starts.size());
  }
  mdp.index_successors();
  return mdp;
}

// Cheapest cost-to-go toward `target` where entering a zone cell costs extra.
std::vector<double> zone_cost_to_go(const ScenarioSpec& spec, const Cell& target) {
  const std::size_t states = spec.layers * spec.size * spec.size;
  const std::size_t actions = spec.num_actions();
  constexpr double kZonePenalty = 1000.0;
  std::vector<double> dist(states, std::numeric_limits<double>::infinity());
  // Reverse Dijkstra: relax predecessors of each settled state.
  std::vector<std::vector<std::pair<StateId, double>>> preds(states);
  for (StateId s = 0; s < states; ++s) {
    const Cell c = spec.cell_of(s);
    for (ActionId a = 0; a < actions; ++a) {
      const Cell nx = apply_move(spec, c, a);
      if (nx == c) continue;
      preds[spec.state_of(nx)].push_back({s, 1.0 + (in_zone(spec, nx) ? kZonePenalty : 0.0)});
    }
  }
  using Item = std::pair<double, StateId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[spec.state_of(target)] = 0.0;
  pq.push({0.0, spec.state_of(target)});
  while (!pq.empty()) {
    const auto [d, s] = pq.top();
    pq.pop();
    if (d > dist[s]) continue;
    for (const auto& [p, w] : preds[s]) {
      if (d + w < dist[p]) {
        dist[p] = d + w;
        pq.push({dist[p], p});
      }
    }
  }
  return dist;
}

}  // namespace

Cell ScenarioSpec::cell_of(StateId s) const {
  Cell c;
  c.col = s % size;
  c.row = (s / size) % size;
  c.layer = s / (size * size);
  return c;
}

bool in_zone(const ScenarioSpec& spec, const Cell& c) {
  return std::find(spec.zone.begin(), spec.zone.end(), c) != spec.zone.end();
}

void ScenarioSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw std::invalid_argument("scenario." + field + ": " + msg);
  };
  if (kind != "perimeter-lap" && kind != "avoid-zone") fail("kind", "unknown scenario kind");
  if (size < 4) fail("size", "must be >= 4");
  if (layers < 1 || layers > 8) fail("layers", "must be in 1..8");
  if (kind == "perimeter-lap" && layers != 1) fail("layers", "perimeter-lap is single-layer");
  const double max_floor = 1.0 / static_cast<double>(num_actions());
  if (!(floor > 0.0 && floor < max_floor)) fail("floor", "must be in (0, 1/num_actions)");
  if (horizon == 0) fail("horizon", "must be positive");
  if (!(discount > 0.0 && discount < 1.0)) fail("discount", "must be in (0, 1)");
  if (goals.empty()) fail("goals", "must be nonempty");
  auto in_grid = [&](const Cell& c) { return c.row < size && c.col < size && c.layer < layers; };
  if (starts.empty()) fail("starts", "must be nonempty");
  for (const auto& c : starts) {
    if (!in_grid(c)) fail("starts", "start outside the grid");
  }
  for (const auto& g : goals) {
    if (!in_grid(g)) fail("goals", "goal outside the grid");
    if (std::find(starts.begin(), starts.end(), g) != starts.end()) {
      fail("goals", "a start cell is a goal");
    }
  }
  for (const auto& z : zone) {
    if (!in_grid(z)) fail("zone", "cell outside the grid");
  }
  if (kind == "avoid-zone" && !in_grid(rest)) fail("rest", "outside the grid");
  if (goal_distance(*this) > horizon) fail("horizon", "goal not reachable within the horizon");
}

std::size_t goal_distance(const ScenarioSpec& spec) {
  const std::size_t states = spec.layers * spec.size * spec.size;
  constexpr auto kUnseen = std::numeric_limits<std::size_t>::max();
  // Multi-source BFS backwards from the goals; moves are reversible on a grid.
  std::vector<std::size_t> dist(states, kUnseen);
  std::deque<StateId> queue;
  for (const auto& g : spec.goals) {
    dist[spec.state_of(g)] = 0;
    queue.push_back(spec.state_of(g));
  }
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    const Cell c = spec.cell_of(s);
    for (ActionId a = 0; a < spec.num_actions(); ++a) {
      const StateId n = spec.state_of(apply_move(spec, c, a));
      if (dist[n] == kUnseen) {
        dist[n] = dist[s] + 1;
        queue.push_back(n);
      }
    }
  }
  std::size_t worst = 0;
  for (const auto& c : spec.starts) {
    const std::size_t d = dist[spec.state_of(c)];
    if (d == kUnseen) throw std::invalid_argument("scenario: a start cannot reach any goal");
    worst = std::max(worst, d);
  }
  return worst;
}

ScenarioSpec perimeter_lap_spec(std::size_t size, double floor) {
  ScenarioSpec spec;
  spec.kind = "perimeter-lap";
  spec.size = size;
  spec.floor = floor;
  spec.horizon = 10 * size;
  spec.goals = {{size / 2 - 1, size / 2, 0}};
  for (std::size_t c = 0; c < size; ++c) {
    for (std::size_t r = 0; r < size; ++r) {
      if (on_perimeter(size, {r, c, 0})) spec.zone.push_back({r, c, 0});
    }
  }
  // Starting anywhere on the route keeps the reference occupancy spread out,
  // so an on-route agent that is a tick early or late is not conspicuous.
  spec.starts = spec.zone;
  return spec;
}

ScenarioSpec avoid_zone_spec(std::size_t size, double floor, std::size_t layers) {
  ScenarioSpec spec;
  spec.kind = "avoid-zone";
  spec.size = size;
  spec.layers = layers;
  spec.floor = floor;
  spec.horizon = 10 * size;
  spec.starts = {{size - 1, 0, 0}};
  const std::size_t top = layers - 1;
  spec.goals = {{1, size - 2, top}};
  spec.rest = {size / 2, size - 2, top};
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t r = 0; r < size / 2; ++r) {
      for (std::size_t c = size / 2; c < size; ++c) spec.zone.push_back({r, c, l});
    }
  }
  return spec;
}

Scenario build_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario out;
  out.spec = spec;
  out.mdp = grid_mdp(spec);
  const std::size_t states = out.mdp.num_states;
  std::vector<ActionId> intended(states, kStay);
  if (spec.kind == "perimeter-lap") {
    for (StateId s = 0; s < states; ++s) intended[s] = perimeter_action(spec.size, spec.cell_of(s));
  } else {
    const auto dist = zone_cost_to_go(spec, spec.rest);
    for (StateId s = 0; s < states; ++s) {
      const Cell c = spec.cell_of(s);
      if (c == spec.rest) continue;
      double best = std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < spec.num_actions(); ++a) {
        const Cell nx = apply_move(spec, c, a);
        if (nx == c) continue;
        const double cost = 1.0 + (in_zone(spec, nx) ? 1000.0 : 0.0) + dist[spec.state_of(nx)];
        if (cost < best) {
          best = cost;
          intended[s] = a;
        }
      }
    }
  }
  out.reference = smoothed(intended, spec.num_actions(), spec.floor);
  return out;
}

Scenario build_perimeter_lap(std::size_t size, double floor) {
  if (size < 4) throw std::invalid_argument("build_perimeter_lap: size must be >= 4");
  return build_scenario(perimeter_lap_spec(size, floor));
}

Scenario build_avoid_zone(std::size_t size, double floor, std::size_t layers) {
  if (size < 4) throw std::invalid_argument("build_avoid_zone: size must be >= 4");
  return build_scenario(avoid_zone_spec(size, floor, layers));
}

}  // namespace tomdec
