#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "lanesim/engine.hpp"
#include "lanesim/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace lanesim;

namespace {

PartitionAssignment split(const fixture::Routed& g, PartitionMethod m, int k) {
  if (k == 1) return PartitionAssignment::single(g.net.node_count());
  auto tg = build_traffic_graph(g.net, g.trips, g.routes, 0, 3600);
  PartitionOptions opt;
  opt.epsilon = 0.15;
  return partition_graph(tg, m, k, opt);
}

SimConfig config(int shards, double end_s, DeterminismMode mode = DeterminismMode::strict) {
  SimConfig cfg;
  cfg.shards = shards;
  cfg.end_s = end_s;
  cfg.mode = mode;
  cfg.check_invariants = true;
  return cfg;
}

bool same_records(const std::vector<TripRecord>& a, const std::vector<TripRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_record(a[i], b[i])) return false;
  return true;
}

/// Occupancy and conservation computed from the public views only.
void check_world(const Simulation& sim, RoadNetwork net) {
  build_lane_map(net);
  const auto map = sim.global_lane_map();
  const auto live = sim.live_vehicles();
  REQUIRE(map.occupied_count() == live.size());
  std::set<std::size_t> cells;
  for (const auto& v : live) {
    const auto idx = cell_index(net.edge(v.cur_edge), v.lane, v.cell());
    REQUIRE(cells.insert(idx).second);
    REQUIRE(map[idx] == encode_speed(v.speed));
  }
  const auto c = sim.counts();
  REQUIRE(c.waiting + c.live + c.finished == c.total);
  REQUIRE(c.live == static_cast<std::int64_t>(live.size()));
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig cfg;
  CHECK(cfg.total_steps() == 7200);
  cfg.end_s = 10.2;
  CHECK(cfg.total_steps() == 21);
  cfg.shards = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.shards = 1;
  cfg.dynamics.dt = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK(parse_determinism_mode("fast") == DeterminismMode::fast);
  CHECK_THROWS_AS(parse_determinism_mode("loose"), ValidationError);
}

TEST_CASE("construction rejects inconsistent inputs") {
  auto g = fixture::grid(3, 3, 20, 1);
  auto cfg = config(1, 100);
  SUBCASE("route table length") {
    auto r = g.routes;
    r.pop_back();
    CHECK_THROWS_AS(Simulation(g.net, g.trips, r, PartitionAssignment::single(9), cfg), ValidationError);
  }
  SUBCASE("duplicate trip ids") {
    auto t = g.trips;
    auto r = g.routes;
    t[1].id = t[0].id;
    r[1].trip_id = t[0].id;
    CHECK_THROWS_AS(Simulation(g.net, t, r, PartitionAssignment::single(9), cfg), ValidationError);
  }
  SUBCASE("shard count mismatch") {
    CHECK_THROWS_AS(Simulation(g.net, g.trips, g.routes, PartitionAssignment::single(9), config(2, 100)),
                    ValidationError);
  }
  SUBCASE("step too long for the shortest edge") {
    auto c = cfg;
    c.dynamics.dt = 10.0;
    CHECK_THROWS_AS(Simulation(g.net, g.trips, g.routes, PartitionAssignment::single(9), c), ValidationError);
  }
}

TEST_CASE("zero trips") {
  auto net = make_grid_network(3, 3);
  Simulation sim(net, {}, {}, PartitionAssignment{{0, 0, 0, 1, 1, 1, 1, 1, 1}, 2}, config(2, 50));
  for (int k = 0; k < 100; ++k) {
    sim.advance(1);
    REQUIRE(sim.global_lane_map().occupied_count() == 0);
  }
  CHECK(sim.done());
  CHECK(sim.records().empty());
}

TEST_CASE("one vehicle on an empty 100 m edge") {
  auto g = fixture::route(fixture::chain({100.0}, 1, 10.0), {Trip{0, 0, 1, 0.0}});
  auto cfg = config(1, 60);
  auto out = run(cfg, g.net, g.trips, g.routes, PartitionAssignment::single(2));
  REQUIRE(out.records.size() == 1);
  const auto& r = out.records[0];
  REQUIRE(r.complete);
  CHECK(r.enter_s == 0.5);
  CHECK(r.distance_m == 100.0);
  const double fine = oracle::free_road_travel_time(100.0, 10.0, 1.5, 4.0, cfg.dt() / 100.0);
  MESSAGE("travel time " << r.travel_time_s << " s, fine-step oracle " << fine << " s");
  CHECK(r.travel_time_s >= 10.0);
  CHECK(std::abs(r.travel_time_s - fine) <= cfg.dt() + 1e-9);
}

TEST_CASE("one entry per edge per step") {
  std::vector<Trip> trips;
  for (int i = 0; i < 6; ++i) trips.push_back(Trip{10 - i, 0, 2, 1.0});
  auto g = fixture::route(fixture::chain({60.0, 60.0}, 1, 12.0), trips);
  for (int k : {1, 2}) {
    PartitionAssignment p = k == 1 ? PartitionAssignment::single(3) : PartitionAssignment{{0, 1, 1}, 2};
    Simulation sim(g.net, g.trips, g.routes, p, config(k, 200));
    sim.run();
    auto rec = sim.records();
    REQUIRE(rec.size() == 6);
    for (std::size_t i = 0; i < rec.size(); ++i) REQUIRE(rec[i].complete);
    // Lower trip ids win the first cell, one per step.
    for (std::size_t i = 1; i < rec.size(); ++i) CHECK(rec[i].enter_s >= rec[i - 1].enter_s + 0.5);
    std::map<double, int> per_time;
    for (const auto& r : rec)
      for (const auto& [e, t] : r.edge_entries) CHECK(++per_time[t * 1000 + e] == 1);
  }
}

TEST_CASE("strict mode results do not depend on the shard count") {
  auto g = fixture::grid(5, 5, 3000, 42);
  auto base = run(config(1, 5400), g.net, g.trips, g.routes, split(g, PartitionMethod::balanced, 1));
  std::size_t complete = 0;
  for (const auto& r : base.records) complete += r.complete;
  CHECK(complete == g.trips.size());
  for (auto m : {PartitionMethod::balanced, PartitionMethod::unbalanced}) {
    for (int k : {2, 4}) {
      auto cfg = config(k, 5400);
      cfg.workers = 2;
      auto out = run(cfg, g.net, g.trips, g.routes, split(g, m, k));
      CAPTURE(to_string(m));
      CAPTURE(k);
      CHECK(out.metrics.ghost_edges > 0);
      CHECK(out.metrics.copies > 0);
      CHECK(same_records(base.records, out.records));
    }
  }
}

TEST_CASE("invariants hold after every superstep") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto mode : {DeterminismMode::strict, DeterminismMode::fast}) {
      auto g = fixture::grid(4, 4, 900, seed, 600, 2);
      const int k = 1 << (seed % 3);
      auto cfg = config(k, 900, mode);
      Simulation sim(g.net, g.trips, g.routes, split(g, PartitionMethod::balanced, k), cfg);
      while (!sim.done()) {
        sim.advance(1);
        sim.check_invariants();
        check_world(sim, g.net);
      }
      CHECK(sim.counts().finished > 0);
    }
  }
}

TEST_CASE("fast mode conserves trips and keeps ghosts consistent") {
  auto g = fixture::grid(5, 5, 2000, 9, 1200);
  std::ostringstream log;
  auto cfg = config(4, 2400, DeterminismMode::fast);
  cfg.ghost_checksum_log = &log;
  Simulation sim(g.net, g.trips, g.routes, split(g, PartitionMethod::balanced, 4), cfg);
  sim.run();
  CHECK(sim.counts().finished == 2000);
  const auto text = log.str();
  CHECK(text.find("DIVERGED") == std::string::npos);
  CHECK(text.find("step 1 edge") != std::string::npos);
}

TEST_CASE("lane changes run under the invariants on multi-lane roads") {
  auto g = fixture::grid(4, 4, 1500, 5, 900, 3);
  auto cfg = config(2, 1800);
  Simulation sim(g.net, g.trips, g.routes, split(g, PartitionMethod::balanced, 2), cfg);
  sim.run();
  CHECK(sim.counts().finished == 1500);
  auto one = run(config(1, 1800), g.net, g.trips, g.routes, PartitionAssignment::single(16));
  CHECK(same_records(one.records, sim.records()));
}

TEST_CASE("stop when done ends early") {
  auto g = fixture::grid(3, 3, 50, 2, 100);
  auto cfg = config(1, 3600);
  cfg.stop_when_done = true;
  Simulation sim(g.net, g.trips, g.routes, PartitionAssignment::single(9), cfg);
  sim.run();
  CHECK(sim.counts().finished == 50);
  CHECK(sim.step() < cfg.total_steps());
}

TEST_CASE("unfinished trips carry empty arrival fields") {
  auto g = fixture::grid(3, 3, 200, 6, 300);
  auto cfg = config(1, 60);
  Simulation sim(g.net, g.trips, g.routes, PartitionAssignment::single(9), cfg);
  std::ostringstream sink;
  sim.run(&sink);
  auto rec = sim.records();
  CHECK(rec.size() == 200);
  std::size_t open = 0;
  for (const auto& r : rec) {
    if (r.complete) continue;
    ++open;
    CHECK(std::isnan(r.arrive_s));
    CHECK(std::isnan(r.travel_time_s));
  }
  CHECK(open > 0);
  std::ostringstream one;
  TripRecord waiting;
  waiting.trip_id = 5;
  waiting.depart_s = 12.5;
  write_record(one, waiting);
  CHECK(one.str() == "5,12.5,,,,\n");
  std::size_t lines = 0;
  for (char ch : sink.str()) lines += ch == '\n';
  CHECK(lines == 200);
}

TEST_CASE("results and metrics files") {
  fixture::TempDir dir("eng");
  auto g = fixture::grid(3, 3, 30, 3, 60);
  Simulation sim(g.net, g.trips, g.routes, PartitionAssignment::single(9), config(1, 600));
  sim.run();
  write_results(dir / "r.csv", sim.records());
  write_metrics(dir / "m.csv", sim.metrics());
  const auto r = fixture::slurp(dir / "r.csv");
  CHECK(r.rfind("id,depart,enter,arrive,travel_time,distance\n", 0) == 0);
  const auto m = fixture::slurp(dir / "m.csv");
  CHECK(m.rfind("step,time_s,waiting,live,finished,copies,deletes,compute_ms,transfer_ms,sync_ms\n", 0) == 0);
  CHECK(static_cast<std::int64_t>(std::count(m.begin(), m.end(), '\n')) == sim.step() + 1);
}

TEST_CASE("a ghost vehicle held at the node keeps both copies") {
  // Signalized grid with dense two-lane traffic: vehicles queue at the end of
  // cut edges on red while the upstream shard has already let them go.
  auto g = fixture::grid(4, 4, 6000, 21, 600, 2);
  auto one = run(config(1, 1500), g.net, g.trips, g.routes, PartitionAssignment::single(16));
  for (int k : {2, 4}) {
    CAPTURE(k);
    Simulation sim(g.net, g.trips, g.routes, split(g, PartitionMethod::balanced, k), config(k, 1500));
    REQUIRE_NOTHROW(sim.run());
    CHECK(same_records(one.records, sim.records()));
  }
}
