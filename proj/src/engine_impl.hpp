#pragma once

// Private state of Simulation, shared by engine.cpp and checkpoint.cpp.

#include <vector>

#include "lanesim/engine.hpp"

namespace lanesim {

struct FinishInfo {
  bool done = false;
  double enter_s = 0.0;
  double arrive_s = 0.0;
  double distance_m = 0.0;
};

struct EntryEvent {
  std::int32_t trip_index = 0;
  EdgeId edge = kNoEdge;
  double time_s = 0.0;
};

struct FinishEvent {
  std::int32_t trip_index = 0;
  FinishInfo info;
};

struct ShardState {
  ShardLayout layout;
  std::vector<std::uint8_t> cur;   // step-k snapshot
  std::vector<std::uint8_t> next;  // step-k+1 under construction
  VehiclePool pool;                // on-road vehicles computed here
  std::vector<std::uint8_t> live;  // per trip index: in `pool`

  // Departures. `waiting` keeps input order; with sorted input only the
  // prefix up to `cursor` is ever inspected.
  bool sorted_departures = true;
  std::vector<std::int32_t> waiting;
  std::size_t cursor = 0;
  std::vector<std::int32_t> pending;  // due but not yet admitted (sorted mode)

  TransferBuffer buffer;
  std::vector<VehicleState> departed;
  std::vector<FinishEvent> finished;
  std::vector<EntryEvent> entries;
  // Ghost-edge vehicles this shard let go at a node it does not own; the
  // node owner decides whether they really left.
  std::vector<std::uint32_t> handoffs;
  // Ghost-edge vehicles held at a node this shard owns, by trip id.
  std::vector<VehicleState> held;

  // Scratch reused across steps.
  std::vector<StepOutcome> outcomes;
  std::vector<std::int32_t> candidates;
  std::vector<StepOutcome> departures;
  std::vector<std::uint8_t> lost;
  std::vector<std::uint8_t> entered;  // per global edge
  std::vector<EdgeId> entered_list;

  std::size_t waiting_count() const noexcept {
    return pending.size() + (waiting.size() - cursor);
  }
};

struct Simulation::Impl {
  RoadNetwork net;
  std::vector<Trip> trips;
  std::vector<Route> routes;
  PartitionAssignment assignment;
  SimConfig cfg;
  GhostZone ghost;
  std::vector<std::size_t> global_offset;  // per edge, contiguous id-order layout
  std::size_t global_bytes = 0;

  std::vector<ShardState> shards;
  std::int64_t step = 0;
  std::int64_t total_steps = 0;
  std::int64_t finished_count = 0;
  std::vector<FinishInfo> finish;  // per trip index
  std::vector<std::vector<std::pair<EdgeId, double>>> entry_log;  // per trip index
  RunMetrics metrics;

  double time_at(std::int64_t k) const noexcept {
    return cfg.start_s + static_cast<double>(k) * cfg.dt();
  }
  std::uint64_t fingerprint() const;
};

}  // namespace lanesim
