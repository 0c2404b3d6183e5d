#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tomdec/mdp.hpp"

namespace tomdec {

/// Grid actions. The stacked avoid-zone variant adds the two vertical moves.
enum GridAction : ActionId {
  kUp = 0,
  kRight = 1,
  kDown = 2,
  kLeft = 3,
  kStay = 4,
  kAscend = 5,
  kDescend = 6,
};

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t layer = 0;
  bool operator==(const Cell&) const = default;
};

struct ScenarioSpec {
  std::string kind;  // "perimeter-lap" or "avoid-zone"
  std::size_t size = 8;
  std::size_t layers = 1;
  double floor = 0.01;
  double step_penalty = -0.01;
  double goal_reward = 1.0;
  std::size_t horizon = 80;
  double discount = 0.99;
  /// The initial distribution is uniform over these cells.
  std::vector<Cell> starts;
  std::vector<Cell> goals;
  /// Cells the reference route covers (perimeter) or must avoid (zone).
  std::vector<Cell> zone;
  /// Where the avoid-zone reference heads and then waits.
  Cell rest;

  std::size_t num_actions() const { return layers > 1 ? 7 : 5; }
  StateId state_of(const Cell& c) const { return (c.layer * size + c.row) * size + c.col; }
  Cell cell_of(StateId s) const;
  void validate() const;
};

struct Scenario {
  TabularMdp mdp;
  TabularPolicy reference;
  ScenarioSpec spec;
};

/// Default specs; the builders accept any spec of the matching kind.
ScenarioSpec perimeter_lap_spec(std::size_t size = 8, double floor = 0.01);
ScenarioSpec avoid_zone_spec(std::size_t size = 8, double floor = 0.01, std::size_t layers = 1);

Scenario build_perimeter_lap(std::size_t size, double floor);
Scenario build_avoid_zone(std::size_t size, double floor, std::size_t layers = 1);
Scenario build_scenario(const ScenarioSpec& spec);

/// Largest over start cells of the shortest number of moves to a goal;
/// throws if some start cannot reach a goal.
std::size_t goal_distance(const ScenarioSpec& spec);

/// True for a cell of the forbidden region of an avoid-zone spec.
bool in_zone(const ScenarioSpec& spec, const Cell& c);

}  // namespace tomdec
