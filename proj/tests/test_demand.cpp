#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "lanesim/demand.hpp"
#include "lanesim/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace lanesim;

TEST_CASE("one-line trip file") {
  fixture::TempDir dir("dem");
  auto net = fixture::chain({50.0});
  std::ofstream(dir / "t.csv") << "0,0,1,3600.0\n";
  auto trips = load_demand(dir / "t.csv", net);
  REQUIRE(trips.size() == 1);
  CHECK(trips[0].depart_s == 3600.0);
  CHECK(trips[0].origin == 0);
  CHECK(trips[0].destination == 1);
  CHECK(trips[0].type == VehicleType::car);
}

TEST_CASE("trip file validation") {
  fixture::TempDir dir("dem");
  auto net = fixture::chain({50.0, 50.0});
  SUBCASE("origin equals destination") {
    std::ofstream(dir / "t.csv") << "id,origin,destination,depart_s,type\n0,1,1,5,car\n";
    CHECK_THROWS_AS(load_demand(dir / "t.csv", net), ValidationError);
  }
  SUBCASE("departure beyond horizon") {
    std::ofstream(dir / "t.csv") << "0,0,2,100\n";
    CHECK_THROWS_AS(load_demand(dir / "t.csv", net, 100.0), ParseError);
    CHECK(load_demand(dir / "t.csv", net, 100.5).size() == 1);
  }
  SUBCASE("unknown node") {
    std::ofstream(dir / "t.csv") << "0,0,7,1\n";
    CHECK_THROWS_AS(load_demand(dir / "t.csv", net), ParseError);
  }
  SUBCASE("unknown vehicle type") {
    std::ofstream(dir / "t.csv") << "0,0,2,1,bicycle\n";
    CHECK_THROWS_AS(load_demand(dir / "t.csv", net), ValidationError);
  }
}

TEST_CASE("demand file round trip") {
  fixture::TempDir dir("dem");
  auto net = make_grid_network(3, 3);
  auto trips = generate_uniform_demand(net, 200, 5, 0, 600);
  trips[3].type = VehicleType::truck;
  trips[4].type = VehicleType::hov;
  save_demand(trips, net, dir / "t.csv");
  CHECK(load_demand(dir / "t.csv", net) == trips);
}

TEST_CASE("uniform generator") {
  auto net = make_grid_network(5, 5);
  auto trips = generate_uniform_demand(net, 10000, 42, 0.0, 3600.0);
  REQUIRE(trips.size() == 10000);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const auto& t = trips[i];
    REQUIRE(t.id == static_cast<std::int64_t>(i));
    REQUIRE(t.origin != t.destination);
    REQUIRE(t.origin >= 0);
    REQUIRE(t.destination < 25);
    REQUIRE(t.depart_s >= 0.0);
    REQUIRE(t.depart_s < 3600.0);
  }
  CHECK(generate_uniform_demand(net, 10000, 42, 0.0, 3600.0) == trips);
  CHECK_FALSE(generate_uniform_demand(net, 10000, 43, 0.0, 3600.0) == trips);
}

TEST_CASE("routing fixtures") {
  SUBCASE("single edge") {
    auto net = fixture::chain({10.0});
    auto r = route_all(net, {Trip{0, 0, 1, 0.0}});
    REQUIRE(r.routes.size() == 1);
    CHECK(r.routes[0].edges == std::vector<EdgeId>{0});
  }
  SUBCASE("two short hops beat one long edge") {
    // Unit speed, so cost equals length: 1 + 1 via node 1 against 3 direct.
    std::vector<Node> nodes{{0, 0, 0, 0, false}, {0, 1, 1, 0, false}, {0, 2, 2, 0, false}};
    std::vector<Edge> edges;
    auto add = [&](int id, int a, int b, double len) {
      Edge e;
      e.external_id = id;
      e.from = a;
      e.to = b;
      e.length_m = len;
      e.free_flow_speed = 1.0;
      edges.push_back(e);
    };
    add(0, 0, 2, 3.0);
    add(1, 0, 1, 1.0);
    add(2, 1, 2, 1.0);
    auto net = RoadNetwork::create(nodes, edges);
    auto r = route_all(net, {Trip{0, 0, 2, 0.0}});
    REQUIRE(r.routes.size() == 1);
    CHECK(r.routes[0].edges == std::vector<EdgeId>{1, 2});
  }
  SUBCASE("equal-cost parallel edges take the lower id") {
    std::vector<Node> nodes{{0, 0, 0, 0, false}, {0, 1, 1, 0, false}};
    std::vector<Edge> edges(2);
    for (int i = 0; i < 2; ++i) {
      edges[i].external_id = i + 1;
      edges[i].from = 0;
      edges[i].to = 1;
      edges[i].length_m = 20;
      edges[i].free_flow_speed = 10;
    }
    auto net = RoadNetwork::create(nodes, edges);
    auto r = route_all(net, {Trip{0, 0, 1, 0.0}});
    CHECK(r.routes[0].edges == std::vector<EdgeId>{0});
  }
  SUBCASE("unreachable destination is reported") {
    auto net = fixture::chain({10.0});
    auto r = route_all(net, {Trip{9, 1, 0, 0.0}});
    CHECK(r.routes.empty());
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].trip_id == 9);
  }
}

TEST_CASE("routes are shortest by edge relaxation") {
  std::mt19937_64 rng(11);
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  const int side = 6;
  for (int i = 0; i < side * side; ++i) nodes.push_back({0, i, double(i % side), double(i / side), false});
  auto add = [&](int a, int b) {
    Edge e;
    e.external_id = static_cast<std::int64_t>(edges.size());
    e.from = a;
    e.to = b;
    e.length_m = std::uniform_real_distribution<double>(10, 200)(rng);
    e.free_flow_speed = std::uniform_real_distribution<double>(5, 20)(rng);
    edges.push_back(e);
  };
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      if (c + 1 < side) add(r * side + c, r * side + c + 1), add(r * side + c + 1, r * side + c);
      if (r + 1 < side) add(r * side + c, (r + 1) * side + c), add((r + 1) * side + c, r * side + c);
    }
  auto net = RoadNetwork::create(nodes, edges);
  auto trips = generate_uniform_demand(net, 300, 9, 0, 100);
  auto res = route_all(net, trips);
  REQUIRE(res.routes.size() == trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    validate_route(net, trips[i], res.routes[i]);
    const auto d = oracle::bellman_ford(net, trips[i].origin);
    CHECK(free_flow_cost(net, res.routes[i].edges) ==
          doctest::Approx(d[static_cast<std::size_t>(trips[i].destination)]).epsilon(1e-12));
  }
}

TEST_CASE("ties resolve to the lexicographically smallest path") {
  // Uniform grid: many equal-cost paths. Enumerate every simple path, keep
  // the cheapest, then the smallest edge sequence.
  auto net = make_grid_network(3, 3, 50.0);
  std::vector<Trip> trips;
  for (NodeId o = 0; o < 9; ++o)
    for (NodeId d = 0; d < 9; ++d)
      if (o != d) trips.push_back({static_cast<std::int64_t>(trips.size()), o, d, 0.0});
  auto res = route_all(net, trips);
  for (std::size_t i = 0; i < trips.size(); ++i) {
    double best_cost = oracle::kInf;
    std::vector<EdgeId> best, cur;
    std::vector<char> seen(9, 0);
    auto dfs = [&](auto&& self, NodeId at, double cost) -> void {
      if (at == trips[i].destination) {
        if (cost < best_cost - 1e-9 || (std::abs(cost - best_cost) <= 1e-9 && cur < best)) {
          best_cost = cost;
          best = cur;
        }
        return;
      }
      seen[static_cast<std::size_t>(at)] = 1;
      for (const auto& e : net.edges()) {
        if (e.from != at || seen[static_cast<std::size_t>(e.to)]) continue;
        cur.push_back(e.id);
        self(self, e.to, cost + e.length_m / e.free_flow_speed);
        cur.pop_back();
      }
      seen[static_cast<std::size_t>(at)] = 0;
    };
    dfs(dfs, trips[i].origin, 0.0);
    REQUIRE(res.routes[i].edges == best);
  }
}

TEST_CASE("route file round trip and validation") {
  fixture::TempDir dir("dem");
  auto g = fixture::grid(4, 4, 100, 3);
  save_routes(g.routes, g.net, dir / "r.csv");
  CHECK(load_routes(dir / "r.csv", g.net) == g.routes);
  auto broken = g.routes[0];
  broken.edges.erase(broken.edges.begin());
  CHECK_THROWS_AS(validate_route(g.net, g.trips[0], broken), ValidationError);
}

TEST_CASE("sort by departure") {
  std::vector<Trip> t{{0, 0, 1, 5.0}, {1, 0, 1, 1.0}, {2, 0, 1, 3.0}};
  auto s = sort_by_departure(t);
  CHECK(s[0].depart_s == 1.0);
  CHECK(s[1].depart_s == 3.0);
  CHECK(s[2].depart_s == 5.0);
  CHECK(sort_by_departure(s) == s);

  std::vector<Trip> ties{{0, 0, 1, 2.0}, {1, 0, 1, 1.0}, {2, 0, 1, 2.0}, {3, 0, 1, 1.0}};
  auto st = sort_by_departure(ties);
  CHECK(st[0].id == 1);
  CHECK(st[1].id == 3);
  CHECK(st[2].id == 0);
  CHECK(st[3].id == 2);
}

TEST_CASE("sort is a nondecreasing permutation") {
  auto net = make_grid_network(4, 4);
  auto trips = generate_uniform_demand(net, 10000, 77, 0, 3600);
  auto s = sort_by_departure(trips);
  auto by_id = s;
  std::sort(by_id.begin(), by_id.end(), [](auto& a, auto& b) { return a.id < b.id; });
  CHECK(by_id == trips);
  CHECK(std::is_sorted(s.begin(), s.end(), [](auto& a, auto& b) { return a.depart_s < b.depart_s; }));
}
