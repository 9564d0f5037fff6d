#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lanesim/demand.hpp"
#include "lanesim/dynamics.hpp"
#include "lanesim/network.hpp"
#include "lanesim/partitioning.hpp"
#include "lanesim/shard_runtime.hpp"

namespace lanesim {

enum class DeterminismMode : std::uint8_t {
  strict,  // claims resolved by trip id; results independent of K and scheduling
  fast,    // claims in pool order; only ghost-edge cells use trip-id order
};

std::string_view to_string(DeterminismMode m) noexcept;
DeterminismMode parse_determinism_mode(std::string_view s);

struct SimConfig {
  DynamicsConfig dynamics;
  double start_s = 0.0;
  double end_s = 3600.0;
  std::int32_t shards = 1;
  std::int32_t workers = 0;  // threads; 0 means one per shard
  PartitionMethod method = PartitionMethod::balanced;
  DeterminismMode mode = DeterminismMode::strict;
  bool check_invariants = false;
  bool stop_when_done = false;  // end early once every trip has finished
  std::ostream* ghost_checksum_log = nullptr;

  double dt() const noexcept { return dynamics.dt; }
  std::int64_t total_steps() const;
  void validate() const;
};

struct TripRecord {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  std::int64_t trip_id = 0;
  double depart_s = 0.0;
  double enter_s = kUnset;   // first cell claimed
  double arrive_s = kUnset;  // passed the end of the last edge
  double travel_time_s = kUnset;  // arrive - enter
  double distance_m = 0.0;
  bool complete = false;
  std::vector<std::pair<EdgeId, double>> edge_entries;
};

/// Bitwise equality, NaN fields included.
bool same_record(const TripRecord& a, const TripRecord& b) noexcept;

struct StepMetrics {
  std::int64_t step = 0;
  double time_s = 0.0;
  std::int64_t waiting = 0;
  std::int64_t live = 0;
  std::int64_t finished = 0;
  std::int64_t copies = 0;
  std::int64_t deletes = 0;
  double compute_ms = 0.0;
  double transfer_ms = 0.0;
  double sync_ms = 0.0;
};

struct RunMetrics {
  std::vector<StepMetrics> steps;
  double wall_ms = 0.0;
  double compute_ms = 0.0;
  double transfer_ms = 0.0;
  double sync_ms = 0.0;
  std::int64_t copies = 0;
  std::int64_t deletes = 0;
  std::int64_t max_live = 0;
  std::int64_t ghost_edges = 0;
};

struct PopulationCounts {
  std::int64_t total = 0;
  std::int64_t waiting = 0;
  std::int64_t live = 0;  // unique trip ids on the road
  std::int64_t finished = 0;
};

class Simulation {
 public:
  /// `routes[i]` belongs to `trips[i]`. The assignment must cover the
  /// network and have `cfg.shards` shards.
  Simulation(const RoadNetwork& net, std::vector<Trip> trips, std::vector<Route> routes,
             PartitionAssignment assignment, SimConfig cfg);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Runs up to `steps` supersteps (fewer at the horizon). Finished trips are
  /// appended to `sink` in results format as each barrier completes.
  void advance(std::int64_t steps, std::ostream* sink = nullptr);
  void run(std::ostream* sink = nullptr);

  std::int64_t step() const noexcept;
  double now() const noexcept;
  bool done() const noexcept;

  /// One record per trip, ordered by trip id. Unfinished trips carry unset
  /// arrival fields.
  std::vector<TripRecord> records() const;
  std::vector<TripRecord> completed_records() const;

  const RunMetrics& metrics() const noexcept;
  PopulationCounts counts() const;

  /// Global lane image assembled from the shards' current buffers, in the
  /// network's contiguous edge layout.
  LaneMap global_lane_map() const;
  /// Unique on-road vehicles ordered by trip id.
  std::vector<VehicleState> live_vehicles() const;
  const GhostZone& ghost_zone() const noexcept;

  /// Throws InvariantViolation if any global invariant is broken right now.
  void check_invariants() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores state written by save_checkpoint for the same inputs and
  /// config. On failure the simulation is left untouched.
  void restore_checkpoint(const std::filesystem::path& path);

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Results file: `id,depart,enter,arrive,travel_time,distance`.
void write_results_header(std::ostream& out);
void write_record(std::ostream& out, const TripRecord& r);
void write_results(const std::filesystem::path& path, const std::vector<TripRecord>& records);
/// Metrics file: one line per superstep.
void write_metrics(const std::filesystem::path& path, const RunMetrics& m);

struct RunOutput {
  std::vector<TripRecord> records;
  RunMetrics metrics;
};

/// Builds a simulation, runs it to the horizon and collects every record.
RunOutput run(const SimConfig& cfg, const RoadNetwork& net, const std::vector<Trip>& trips,
              const std::vector<Route>& routes, const PartitionAssignment& assignment);

}  // namespace lanesim
