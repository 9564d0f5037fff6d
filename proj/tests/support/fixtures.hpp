#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "lanesim/demand.hpp"
#include "lanesim/network.hpp"
#include "lanesim/partitioning.hpp"
#include "lanesim/scenario.hpp"

namespace fixture {

/// Nodes 0..n along the x axis, edge i from node i to node i+1.
inline lanesim::RoadNetwork chain(const std::vector<double>& lengths, std::int32_t lanes = 1,
                                  double speed = 13.9, bool both_ways = false) {
  std::vector<lanesim::Node> nodes;
  std::vector<lanesim::Edge> edges;
  double x = 0.0;
  for (std::size_t i = 0; i <= lengths.size(); ++i) {
    nodes.push_back({0, static_cast<std::int64_t>(i), x, 0.0, false});
    if (i < lengths.size()) x += lengths[i];
  }
  auto add = [&](std::int64_t from, std::int64_t to, double len) {
    lanesim::Edge e;
    e.external_id = static_cast<std::int64_t>(edges.size());
    e.from = static_cast<lanesim::NodeId>(from);
    e.to = static_cast<lanesim::NodeId>(to);
    e.length_m = len;
    e.lanes = lanes;
    e.free_flow_speed = speed;
    edges.push_back(e);
  };
  for (std::size_t i = 0; i < lengths.size(); ++i) add(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i + 1), lengths[i]);
  if (both_ways)
    for (std::size_t i = 0; i < lengths.size(); ++i) add(static_cast<std::int64_t>(i + 1), static_cast<std::int64_t>(i), lengths[i]);
  return lanesim::RoadNetwork::create(std::move(nodes), std::move(edges));
}

struct Routed {
  lanesim::RoadNetwork net;
  std::vector<lanesim::Trip> trips;
  std::vector<lanesim::Route> routes;
};

inline Routed route(lanesim::RoadNetwork net, const std::vector<lanesim::Trip>& trips) {
  auto r = lanesim::route_all(net, trips);
  return Routed{std::move(net), std::move(r.routed_trips), std::move(r.routes)};
}

inline Routed grid(int cols, int rows, std::size_t trips, std::uint64_t seed, double window = 3600.0,
                   std::int32_t lanes = 1, bool sorted = true) {
  lanesim::ScenarioSpec spec;
  spec.cols = cols;
  spec.rows = rows;
  spec.trips = trips;
  spec.seed = seed;
  spec.window_end_s = window;
  spec.lanes = lanes;
  spec.sort_by_departure = sorted;
  auto s = lanesim::generate_grid_scenario(spec);
  return route(std::move(s.net), s.trips);
}

/// Erdos-Renyi style weighted graph with integer weights 1..5.
inline lanesim::TrafficGraph random_graph(int n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(p);
  std::uniform_int_distribution<int> w(1, 5);
  std::vector<std::tuple<int, int, double>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (keep(rng)) e.emplace_back(i, j, static_cast<double>(w(rng)));
  lanesim::Points2d xy(n, 2);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int i = 0; i < n; ++i) {
    xy(i, 0) = u(rng);
    xy(i, 1) = u(rng);
  }
  return lanesim::TrafficGraph::from_edges(n, e, xy);
}

/// Two k-cliques with unit weights, optionally joined 0 -> k by `bridge`.
inline lanesim::TrafficGraph two_cliques(int k, double bridge = 0.0) {
  std::vector<std::tuple<int, int, double>> e;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) e.emplace_back(c * k + i, c * k + j, 1.0);
  if (bridge > 0) e.emplace_back(0, k, bridge);
  return lanesim::TrafficGraph::from_edges(2 * k, e);
}

inline lanesim::TrafficGraph path(int n) {
  std::vector<std::tuple<int, int, double>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1, 1.0);
  return lanesim::TrafficGraph::from_edges(n, e);
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("lanesim_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace fixture
