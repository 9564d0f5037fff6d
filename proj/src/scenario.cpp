#include "lanesim/scenario.hpp"

#include <string>

#include "lanesim/error.hpp"

namespace lanesim {

Scenario generate_grid_scenario(const ScenarioSpec& spec) {
  if (spec.cols < 2 || spec.rows < 2) throw ValidationError("grid needs at least 2 x 2 nodes");
  Scenario s;
  s.spec = spec;
  s.net = make_grid_network(spec.cols, spec.rows, spec.spacing_m, spec.lanes, spec.free_flow_mps);
  // Grids are strongly connected, so every ordered pair of distinct nodes is reachable.
  const auto n = static_cast<std::size_t>(spec.cols) * static_cast<std::size_t>(spec.rows);
  const std::size_t pairs = n * (n - 1);
  if (spec.trips > pairs * spec.multiplicity_cap)
    throw ValidationError(std::to_string(spec.trips) + " trips exceed " + std::to_string(pairs) +
                          " OD pairs x multiplicity cap " + std::to_string(spec.multiplicity_cap));
  s.trips = generate_uniform_demand(s.net, spec.trips, spec.seed, spec.window_begin_s,
                                    spec.window_end_s);
  if (spec.sort_by_departure) s.trips = sort_by_departure(std::move(s.trips));
  return s;
}

void write_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_network(s.net, dir / "network.txt");
  save_demand(s.trips, s.net, dir / "trips.csv");
}

}  // namespace lanesim
