#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "lanesim/network.hpp"

namespace lanesim {

enum class VehicleType : std::uint8_t { car = 0, hov = 1, truck = 2 };

std::string_view to_string(VehicleType t) noexcept;
VehicleType parse_vehicle_type(std::string_view s);

struct Trip {
  std::int64_t id = 0;
  NodeId origin = 0;       // dense node index
  NodeId destination = 0;  // dense node index
  double depart_s = 0.0;
  VehicleType type = VehicleType::car;
  friend bool operator==(const Trip&, const Trip&) = default;
};

struct Route {
  std::int64_t trip_id = 0;
  std::vector<EdgeId> edges;
  friend bool operator==(const Route&, const Route&) = default;
};

struct UnroutableTrip {
  std::int64_t trip_id = 0;
  std::string reason;
};

struct RoutingResult {
  std::vector<Route> routes;              // one per routable trip, input order
  std::vector<Trip> routed_trips;         // trips matching `routes` index for index
  std::vector<UnroutableTrip> failures;
};

/// Trip file: `id,origin,destination,depart_s,type` with external node ids.
/// When `horizon_end_s` is finite, departures at or beyond it are rejected.
std::vector<Trip> load_demand(const std::filesystem::path& path, const RoadNetwork& net,
                              double horizon_end_s = std::numeric_limits<double>::infinity());
void save_demand(const std::vector<Trip>& trips, const RoadNetwork& net,
                 const std::filesystem::path& path);

/// Free-flow-time shortest paths (length / free-flow speed). Among equal-cost
/// paths the lexicographically smallest edge-id sequence wins.
RoutingResult route_all(const RoadNetwork& net, const std::vector<Trip>& trips);

/// Travel time of a path under free-flow speeds.
double free_flow_cost(const RoadNetwork& net, const std::vector<EdgeId>& edges);

/// Stable ascending order on departure time.
std::vector<Trip> sort_by_departure(std::vector<Trip> trips);

/// Uniform OD pairs (origin != destination) with departures uniform over
/// [window_begin, window_end), millisecond resolution. Ids are 0..count-1.
std::vector<Trip> generate_uniform_demand(const RoadNetwork& net, std::size_t count,
                                          std::uint64_t seed, double window_begin_s,
                                          double window_end_s);

/// Route cache: `trip_id,edge,edge,...` with external edge ids.
void save_routes(const std::vector<Route>& routes, const RoadNetwork& net,
                 const std::filesystem::path& path);
std::vector<Route> load_routes(const std::filesystem::path& path, const RoadNetwork& net);

/// Throws ValidationError unless the route is a connected origin->destination path.
void validate_route(const RoadNetwork& net, const Trip& trip, const Route& route);

}  // namespace lanesim
