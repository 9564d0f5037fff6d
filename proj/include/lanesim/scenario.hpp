#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lanesim/demand.hpp"
#include "lanesim/network.hpp"

namespace lanesim {

struct ScenarioSpec {
  int cols = 5;
  int rows = 5;
  std::size_t trips = 1000;
  std::uint64_t seed = 42;
  double window_begin_s = 0.0;
  double window_end_s = 3600.0;
  double spacing_m = 100.0;
  std::int32_t lanes = 1;
  double free_flow_mps = 13.9;
  std::size_t multiplicity_cap = 1000;  // max trips per ordered OD pair, on average
  bool sort_by_departure = true;
};

struct Scenario {
  ScenarioSpec spec;
  RoadNetwork net;
  std::vector<Trip> trips;
};

/// Grid network plus seeded uniform OD demand; identical for identical specs.
Scenario generate_grid_scenario(const ScenarioSpec& spec);

/// Writes `network.txt` and `trips.csv` into `dir` (created if needed).
void write_scenario(const Scenario& s, const std::filesystem::path& dir);

}  // namespace lanesim
