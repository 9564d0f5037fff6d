#include <doctest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "lanesim/error.hpp"
#include "lanesim/network.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace lanesim;

namespace {

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream(p) << body;
}

}  // namespace

TEST_CASE("smallest network file loads") {
  fixture::TempDir dir("net");
  write_file(dir / "n.txt",
             "[nodes]\nid,x,y,signalized\n10,0,0,0\n20,8,0,0\n"
             "[edges]\nid,from,to,length_m,lanes,free_flow_mps\n7,10,20,8,4,13.9\n");
  auto net = load_network(dir / "n.txt");
  CHECK(net.node_count() == 2);
  REQUIRE(net.edge_count() == 1);
  CHECK(net.out_edges(0).size() == 1);
  CHECK(net.out_edges(0)[0] == 0);
  CHECK(net.edge(0).lanes == 4);
  CHECK(net.edge(0).external_id == 7);
}

TEST_CASE("edge endpoint missing from node list is rejected") {
  fixture::TempDir dir("net");
  write_file(dir / "n.txt",
             "[nodes]\nid,x,y,signalized\n1,0,0,0\n2,8,0,0\n"
             "[edges]\nid,from,to,length_m,lanes,free_flow_mps\n0,1,99,8,1,13.9\n");
  CHECK_THROWS_AS(load_network(dir / "n.txt"), ValidationError);
}

TEST_CASE("malformed network records report their line") {
  fixture::TempDir dir("net");
  write_file(dir / "n.txt", "[nodes]\nid,x,y,signalized\n1,0,0,0\n2,zero,0,0\n");
  try {
    load_network(dir / "n.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("network file round trip is byte stable") {
  fixture::TempDir dir("net");
  auto net = make_grid_network(3, 2, 75.5, 2, 11.0);
  save_network(net, dir / "a.txt");
  auto back = load_network(dir / "a.txt");
  save_network(back, dir / "b.txt");
  CHECK(fixture::slurp(dir / "a.txt") == fixture::slurp(dir / "b.txt"));
  CHECK(back.edge_count() == net.edge_count());
}

TEST_CASE("grid generator edge count") {
  auto net = make_grid_network(5, 5);
  CHECK(net.node_count() == 25);
  // 2 * (rows * (cols - 1) + cols * (rows - 1)) directed links.
  CHECK(net.edge_count() == 2 * (5 * 4 + 5 * 4));
  CHECK(net.edge_count() == 80);
}

TEST_CASE("lane map layout") {
  SUBCASE("one 1 m lane is one byte") {
    auto net = fixture::chain({1.0});
    auto map = build_lane_map(net);
    CHECK(map.size() == 1);
  }
  SUBCASE("offsets follow edge order") {
    std::vector<Node> nodes{{0, 0, 0, 0, false}, {0, 1, 1, 0, false}, {0, 2, 2, 0, false}, {0, 3, 3, 0, false}};
    std::vector<Edge> edges(3);
    const double len[] = {2, 3, 4};
    const int lanes[] = {1, 2, 1};
    for (int i = 0; i < 3; ++i) {
      edges[i].external_id = i;
      edges[i].from = i;
      edges[i].to = i + 1;
      edges[i].length_m = len[i];
      edges[i].lanes = lanes[i];
      edges[i].free_flow_speed = 10;
    }
    auto net = RoadNetwork::create(nodes, edges);
    auto map = build_lane_map(net);
    std::size_t expect = 0;
    for (int i = 0; i < 3; ++i) {
      CHECK(net.edge(i).lane_map_offset == expect);
      expect += static_cast<std::size_t>(len[i] * lanes[i]);
    }
    CHECK(map.size() == 12);
    CHECK(net.edge(1).lane_map_offset == 2);
    CHECK(net.edge(2).lane_map_offset == 8);
  }
  SUBCASE("budget is enforced") {
    auto net = fixture::chain({100.0, 100.0});
    CHECK_THROWS_AS(build_lane_map(net, 150), ValidationError);
  }
}

TEST_CASE("locate_cell inverts cell_index everywhere") {
  auto net = make_grid_network(3, 3, 17.3, 3);
  auto map = build_lane_map(net);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto ref = locate_cell(net, i);
    REQUIRE(cell_index(net.edge(ref.edge), ref.lane, ref.pos) == i);
  }
}

TEST_CASE("probe ahead") {
  std::vector<std::uint8_t> lane(40, kFreeCell);
  CHECK_FALSE(probe_ahead(lane, 5, 10).has_value());
  lane[8] = 12;
  auto p = probe_ahead(lane, 5, 10);
  REQUIRE(p);
  CHECK(*p == Probe{3, 12.0});
  std::fill(lane.begin(), lane.end(), kFreeCell);
  lane[9] = 7;
  lane[14] = 20;
  p = probe_ahead(lane, 5, 10);
  REQUIRE(p);
  CHECK(*p == Probe{4, 7.0});
}

TEST_CASE("probe ahead matches a full scan on random lanes") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 60)(rng);
    std::vector<std::uint8_t> lane(static_cast<std::size_t>(n), kFreeCell);
    for (auto& b : lane)
      if (std::bernoulli_distribution(0.15)(rng)) b = static_cast<std::uint8_t>(rng() % 255);
    const int pos = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const int horizon = std::uniform_int_distribution<int>(0, 70)(rng);
    const auto got = probe_ahead(lane, pos, horizon);
    const auto want = oracle::naive_probe(lane, pos, horizon);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(got->gap_m == want->first);
      CHECK(got->front_speed == want->second);
    }
  }
}

TEST_CASE("claim cell") {
  LaneMap map(4);
  CHECK(claim_cell(map, 2, 30));
  CHECK(map[2] == 30);
  CHECK_FALSE(claim_cell(map, 2, 5));
  CHECK(map[2] == 30);
  CHECK_THROWS(claim_cell(map, 1, kFreeCell));
}

TEST_CASE("concurrent claims on one cell: exactly one wins") {
  constexpr int kThreads = 8;
  constexpr int kRounds = 300;
  LaneMap map(kRounds);
  std::vector<std::atomic<int>> wins(kRounds);
  std::atomic<int> go{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < kThreads; ++t) {
    pool.emplace_back([&, t] {
      while (go.load() == 0) std::this_thread::yield();
      for (int r = 0; r < kRounds; ++r)
        if (claim_cell(map, static_cast<std::size_t>(r), static_cast<std::uint8_t>(t))) wins[r].fetch_add(1);
    });
  }
  go = 1;
  for (auto& th : pool) th.join();
  for (int r = 0; r < kRounds; ++r) REQUIRE(wins[r].load() == 1);
  CHECK(map.occupied_count() == kRounds);
}

TEST_CASE("speed encoding") {
  CHECK(encode_speed(-3) == 0);
  CHECK(encode_speed(0.99) == 0);
  CHECK(encode_speed(13.9) == 13);
  CHECK(encode_speed(1000) == kMaxSpeedByte);
}
