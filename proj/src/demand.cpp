#include "lanesim/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

constexpr std::string_view kTripHeader = "id,origin,destination,depart_s,type";
constexpr double kInf = std::numeric_limits<double>::infinity();

double edge_cost(const Edge& e) { return e.length_m / e.free_flow_speed; }

/// Free-flow time from every node to `target`, over reversed edges.
std::vector<double> distances_to(const RoadNetwork& net, NodeId target) {
  std::vector<double> dist(net.node_count(), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(target)] = 0.0;
  heap.emplace(0.0, target);
  while (!heap.empty()) {
    auto [d, n] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(n)]) continue;
    for (EdgeId eid : net.in_edges(n)) {
      const Edge& e = net.edge(eid);
      const double nd = d + edge_cost(e);
      auto& slot = dist[static_cast<std::size_t>(e.from)];
      if (nd < slot) {
        slot = nd;
        heap.emplace(nd, e.from);
      }
    }
  }
  return dist;
}

/// Bounded draw in [0, n) from raw 64-bit engine output; portable across
/// standard libraries, unlike uniform_int_distribution.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace

std::string_view to_string(VehicleType t) noexcept {
  switch (t) {
    case VehicleType::car: return "car";
    case VehicleType::hov: return "hov";
    case VehicleType::truck: return "truck";
  }
  return "car";
}

VehicleType parse_vehicle_type(std::string_view s) {
  s = text::trim(s);
  if (s.empty() || s == "car") return VehicleType::car;
  if (s == "hov") return VehicleType::hov;
  if (s == "truck") return VehicleType::truck;
  throw ValidationError("unknown vehicle type '" + std::string(s) + "'");
}

std::vector<Trip> load_demand(const std::filesystem::path& path, const RoadNetwork& net,
                              double horizon_end_s) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trip file " + path.string());
  const std::string file = path.string();
  std::vector<Trip> trips;
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (text::is_skippable(raw)) continue;
    const auto line = text::trim(raw);
    if (!header_seen && line == kTripHeader) {
      header_seen = true;
      continue;
    }
    const auto f = text::split(line);
    if (f.size() != 4 && f.size() != 5)
      throw ParseError(file, line_no, "trip record needs 4 or 5 fields");
    auto id = text::parse_number<std::int64_t>(f[0]);
    auto origin = text::parse_number<std::int64_t>(f[1]);
    auto dest = text::parse_number<std::int64_t>(f[2]);
    auto depart = text::parse_number<double>(f[3]);
    if (!id || !origin || !dest || !depart) throw ParseError(file, line_no, "malformed trip record");
    auto o = net.find_node(*origin);
    auto d = net.find_node(*dest);
    if (!o) throw ParseError(file, line_no, "unknown node id " + std::to_string(*origin));
    if (!d) throw ParseError(file, line_no, "unknown node id " + std::to_string(*dest));
    if (*o == *d) throw ParseError(file, line_no, "origin equals destination");
    if (!(*depart >= 0.0)) throw ParseError(file, line_no, "negative departure time");
    if (*depart >= horizon_end_s)
      throw ParseError(file, line_no, "departure time beyond the simulation horizon");
    Trip t{*id, *o, *d, *depart, VehicleType::car};
    if (f.size() == 5) {
      try {
        t.type = parse_vehicle_type(f[4]);
      } catch (const ValidationError& e) {
        throw ParseError(file, line_no, e.what());
      }
    }
    trips.push_back(t);
  }
  return trips;
}

void save_demand(const std::vector<Trip>& trips, const RoadNetwork& net,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write trip file " + path.string());
  out << kTripHeader << '\n';
  for (const auto& t : trips) {
    out << t.id << ',' << net.node(t.origin).external_id << ','
        << net.node(t.destination).external_id << ',' << text::format_double(t.depart_s) << ','
        << to_string(t.type) << '\n';
  }
}

double free_flow_cost(const RoadNetwork& net, const std::vector<EdgeId>& edges) {
  double c = 0.0;
  for (EdgeId e : edges) c += edge_cost(net.edge(e));
  return c;
}

RoutingResult route_all(const RoadNetwork& net, const std::vector<Trip>& trips) {
  // Group by destination so each reverse tree is computed once.
  std::vector<std::size_t> order(trips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trips[a].destination < trips[b].destination;
  });

  std::vector<std::optional<Route>> routed(trips.size());
  std::vector<std::string> reasons(trips.size());
  std::vector<double> dist;
  NodeId cached = -1;
  for (std::size_t idx : order) {
    const Trip& t = trips[idx];
    if (t.destination != cached) {
      dist = distances_to(net, t.destination);
      cached = t.destination;
    }
    if (t.origin == t.destination) {
      reasons[idx] = "origin equals destination";
      continue;
    }
    if (!std::isfinite(dist[static_cast<std::size_t>(t.origin)])) {
      reasons[idx] = "destination unreachable";
      continue;
    }
    // Walk the shortest-path DAG taking the smallest admissible edge id.
    Route r{t.id, {}};
    NodeId at = t.origin;
    while (at != t.destination) {
      const double here = dist[static_cast<std::size_t>(at)];
      const double tol = 1e-12 * std::max(1.0, here);
      EdgeId pick = kNoEdge;
      for (EdgeId eid : net.out_edges(at)) {
        const Edge& e = net.edge(eid);
        const double rest = dist[static_cast<std::size_t>(e.to)];
        if (std::isfinite(rest) && std::abs(edge_cost(e) + rest - here) <= tol) {
          pick = eid;
          break;
        }
      }
      if (pick == kNoEdge) throw std::logic_error("shortest-path DAG walk lost its way");
      r.edges.push_back(pick);
      at = net.edge(pick).to;
    }
    routed[idx] = std::move(r);
  }

  RoutingResult result;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (routed[i]) {
      result.routes.push_back(std::move(*routed[i]));
      result.routed_trips.push_back(trips[i]);
    } else {
      result.failures.push_back(UnroutableTrip{trips[i].id, reasons[i]});
    }
  }
  return result;
}

std::vector<Trip> sort_by_departure(std::vector<Trip> trips) {
  std::stable_sort(trips.begin(), trips.end(),
                   [](const Trip& a, const Trip& b) { return a.depart_s < b.depart_s; });
  return trips;
}

std::vector<Trip> generate_uniform_demand(const RoadNetwork& net, std::size_t count,
                                          std::uint64_t seed, double window_begin_s,
                                          double window_end_s) {
  const auto n = net.node_count();
  if (n < 2) throw ValidationError("demand generation needs at least two nodes");
  if (!(window_end_s > window_begin_s) || window_begin_s < 0.0)
    throw ValidationError("departure window must be a nonempty range of nonnegative times");
  const auto begin_ms = static_cast<std::uint64_t>(std::llround(window_begin_s * 1000.0));
  const auto end_ms = static_cast<std::uint64_t>(std::llround(window_end_s * 1000.0));

  std::mt19937_64 rng(seed);
  std::vector<Trip> trips;
  trips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto o = static_cast<NodeId>(draw_below(rng, n));
    auto d = static_cast<NodeId>(draw_below(rng, n - 1));
    if (d >= o) ++d;
    const auto ms = begin_ms + draw_below(rng, end_ms - begin_ms);
    trips.push_back(Trip{static_cast<std::int64_t>(i), o, d, static_cast<double>(ms) / 1000.0,
                         VehicleType::car});
  }
  return trips;
}

void validate_route(const RoadNetwork& net, const Trip& trip, const Route& route) {
  const std::string who = "route of trip " + std::to_string(trip.id);
  if (route.edges.empty()) throw ValidationError(who + " is empty");
  if (route.trip_id != trip.id) throw ValidationError(who + " carries a different trip id");
  for (EdgeId e : route.edges) {
    if (e < 0 || static_cast<std::size_t>(e) >= net.edge_count())
      throw ValidationError(who + " references an unknown edge");
  }
  if (net.edge(route.edges.front()).from != trip.origin)
    throw ValidationError(who + " does not start at the origin");
  if (net.edge(route.edges.back()).to != trip.destination)
    throw ValidationError(who + " does not end at the destination");
  for (std::size_t i = 1; i < route.edges.size(); ++i) {
    if (net.edge(route.edges[i - 1]).to != net.edge(route.edges[i]).from)
      throw ValidationError(who + " is disconnected at position " + std::to_string(i));
  }
}

void save_routes(const std::vector<Route>& routes, const RoadNetwork& net,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write route file " + path.string());
  for (const auto& r : routes) {
    out << r.trip_id;
    for (EdgeId e : r.edges) out << ',' << net.edge(e).external_id;
    out << '\n';
  }
}

std::vector<Route> load_routes(const std::filesystem::path& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open route file " + path.string());
  std::vector<Route> routes;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (text::is_skippable(raw)) continue;
    const auto f = text::split(text::trim(raw));
    auto id = text::parse_number<std::int64_t>(f[0]);
    if (!id || f.size() < 2) throw ParseError(path.string(), line_no, "malformed route record");
    Route r{*id, {}};
    for (std::size_t i = 1; i < f.size(); ++i) {
      auto ext = text::parse_number<std::int64_t>(f[i]);
      auto e = ext ? net.find_edge(*ext) : std::nullopt;
      if (!e) throw ParseError(path.string(), line_no, "unknown edge id");
      r.edges.push_back(*e);
    }
    routes.push_back(std::move(r));
  }
  return routes;
}

}  // namespace lanesim
