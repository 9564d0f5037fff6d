#include <doctest.h>

#include <fstream>

#include "lanesim/engine.hpp"
#include "lanesim/error.hpp"
#include "support/fixtures.hpp"

using namespace lanesim;

namespace {

struct Case {
  fixture::Routed g = fixture::grid(4, 4, 600, 13, 400, 2);
  PartitionAssignment p{{0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1}, 2};
  SimConfig cfg;
  Case() {
    cfg.shards = 2;
    cfg.end_s = 900;
    cfg.check_invariants = true;
  }
  Simulation make() const { return Simulation(g.net, g.trips, g.routes, p, cfg); }
};

bool same(const std::vector<TripRecord>& a, const std::vector<TripRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_record(a[i], b[i])) return false;
  return true;
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

TEST_CASE("checkpoint at step zero restores the initial state") {
  fixture::TempDir dir("ck");
  Case c;
  auto a = c.make();
  a.save_checkpoint(dir / "s0.ck");
  auto b = c.make();
  b.advance(100);
  b.restore_checkpoint(dir / "s0.ck");
  CHECK(b.step() == 0);
  CHECK(b.global_lane_map() == a.global_lane_map());
  CHECK(same(b.records(), a.records()));
  CHECK(b.counts().waiting == static_cast<std::int64_t>(c.g.trips.size()));
}

TEST_CASE("resuming from a mid-run checkpoint matches the uninterrupted run") {
  fixture::TempDir dir("ck");
  Case c;
  auto full = c.make();
  full.run();

  auto first = c.make();
  first.advance(700);
  first.save_checkpoint(dir / "mid.ck");

  auto second = c.make();
  second.restore_checkpoint(dir / "mid.ck");
  CHECK(second.step() == 700);
  CHECK(second.global_lane_map() == first.global_lane_map());
  second.run();
  CHECK(same(second.records(), full.records()));
  first.run();
  CHECK(same(first.records(), full.records()));
}

TEST_CASE("damaged checkpoints are rejected without touching the simulation") {
  fixture::TempDir dir("ck");
  Case c;
  auto src = c.make();
  src.advance(300);
  src.save_checkpoint(dir / "good.ck");
  const std::string good = fixture::slurp(dir / "good.ck");
  REQUIRE(good.size() > 32);
  CHECK(good.substr(0, 4) == "LSCK");

  auto target = c.make();
  target.advance(120);
  const auto before = target.global_lane_map();
  const auto records_before = target.records();

  auto expect_reject = [&](const std::string& bytes) {
    write_bytes(dir / "bad.ck", bytes);
    CHECK_THROWS_AS(target.restore_checkpoint(dir / "bad.ck"), ValidationError);
    CHECK(target.step() == 120);
    CHECK(target.global_lane_map() == before);
    CHECK(same(target.records(), records_before));
  };

  SUBCASE("flipped payload byte") {
    auto bad = good;
    bad[bad.size() / 2] = static_cast<char>(bad[bad.size() / 2] ^ 0x40);
    expect_reject(bad);
  }
  SUBCASE("truncated") { expect_reject(good.substr(0, good.size() - 9)); }
  SUBCASE("header only") { expect_reject(good.substr(0, 10)); }
  SUBCASE("wrong magic") {
    auto bad = good;
    bad[0] = 'X';
    expect_reject(bad);
  }
  SUBCASE("unknown version") {
    auto bad = good;
    bad[4] = 9;
    expect_reject(bad);
  }
  SUBCASE("trailing bytes") { expect_reject(good + "xyz"); }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(target.restore_checkpoint(dir / "absent.ck"), ValidationError);
    CHECK(target.step() == 120);
  }

  // After every rejection the run still finishes like an untouched one.
  auto reference = c.make();
  reference.run();
  target.run();
  CHECK(same(target.records(), reference.records()));
}

TEST_CASE("checkpoint from other inputs is rejected") {
  fixture::TempDir dir("ck");
  Case c;
  auto src = c.make();
  src.advance(50);
  src.save_checkpoint(dir / "a.ck");

  Case other;
  other.cfg.dynamics.seed = 99;
  auto sim = other.make();
  CHECK_THROWS_AS(sim.restore_checkpoint(dir / "a.ck"), ValidationError);

  Case fewer;
  fewer.g.trips.pop_back();
  fewer.g.routes.pop_back();
  auto sim2 = fewer.make();
  CHECK_THROWS_AS(sim2.restore_checkpoint(dir / "a.ck"), ValidationError);
}
