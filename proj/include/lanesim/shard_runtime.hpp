#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lanesim/dynamics.hpp"
#include "lanesim/network.hpp"
#include "lanesim/partitioning.hpp"

namespace lanesim {

// ---------------------------------------------------------------------------
// Ghost zone

struct GhostEdge {
  EdgeId edge = kNoEdge;
  std::int32_t owner = 0;   // shard of the upstream node
  std::int32_t mirror = 0;  // shard of the downstream node
  friend bool operator==(const GhostEdge&, const GhostEdge&) = default;
};

class GhostZone {
 public:
  GhostZone() = default;
  GhostZone(std::vector<GhostEdge> edges, std::size_t edge_count);

  const std::vector<GhostEdge>& edges() const noexcept { return edges_; }
  bool empty() const noexcept { return edges_.empty(); }
  std::size_t size() const noexcept { return edges_.size(); }
  bool contains(EdgeId e) const noexcept {
    return e >= 0 && static_cast<std::size_t>(e) < slot_.size() && slot_[static_cast<std::size_t>(e)] >= 0;
  }
  const GhostEdge* find(EdgeId e) const noexcept {
    return contains(e) ? &edges_[static_cast<std::size_t>(slot_[static_cast<std::size_t>(e)])] : nullptr;
  }

 private:
  std::vector<GhostEdge> edges_;
  std::vector<std::int32_t> slot_;
};

/// Edges whose endpoints lie on different shards, in edge-id order.
GhostZone identify_ghost_edges(const PartitionAssignment& assignment, const RoadNetwork& net);

/// Per-shard byte layout: every edge incident to an owned node, in id order.
struct ShardLayout {
  std::int32_t shard = 0;
  std::vector<EdgeId> edges;
  std::vector<std::int64_t> edge_offset;  // per global edge, -1 when not held
  std::size_t bytes = 0;

  bool holds(EdgeId e) const noexcept { return edge_offset[static_cast<std::size_t>(e)] >= 0; }
};

ShardLayout make_shard_layout(const RoadNetwork& net, const PartitionAssignment& assignment,
                              std::int32_t shard);

// ---------------------------------------------------------------------------
// Vehicle movement classification

enum class MoveAction : std::uint8_t { local, replicate, handoff_delete };

struct MoveDecision {
  MoveAction action = MoveAction::local;
  std::int32_t destination = -1;  // mirror shard for replicate
  friend bool operator==(const MoveDecision&, const MoveDecision&) = default;
};

/// Decides what the evaluating shard does with a vehicle after its step.
/// `next` is the post-step state and `kind` the step outcome.
MoveDecision classify_vehicle_move(const VehicleState& next, StepKind kind, const GhostZone& ghost,
                                   const PartitionAssignment& assignment, std::int32_t shard,
                                   const RoadNetwork& net);

// ---------------------------------------------------------------------------
// Pools and transfer buffers

class VehiclePool {
 public:
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  VehicleState& operator[](std::size_t i) { return items_[i]; }
  const VehicleState& operator[](std::size_t i) const { return items_[i]; }
  std::span<const VehicleState> items() const noexcept { return items_; }
  std::span<VehicleState> items() noexcept { return items_; }

  void push(const VehicleState& v) { items_.push_back(v); }
  void clear() noexcept { items_.clear(); }
  void reserve(std::size_t n) { items_.reserve(n); }

  /// Removes the given positions by swap-with-last, largest position first.
  void erase_positions(std::vector<std::uint32_t> positions);

 private:
  std::vector<VehicleState> items_;
};

struct CopyRecord {
  VehicleState vehicle;
  std::int32_t destination = 0;
};

/// Append-only record area shared by the tasks of one shard during a step.
/// Slots are claimed with an atomic cursor; the buffer is read only after
/// the step barrier.
class TransferBuffer {
 public:
  explicit TransferBuffer(std::size_t capacity = 0) { reset(capacity); }
  TransferBuffer(const TransferBuffer&) = delete;
  TransferBuffer& operator=(const TransferBuffer&) = delete;
  TransferBuffer(TransferBuffer&& other) noexcept;
  TransferBuffer& operator=(TransferBuffer&& other) noexcept;

  /// Clears both lists and makes room for `capacity` records of each kind.
  void reset(std::size_t capacity);
  std::size_t capacity() const noexcept { return copies_.size(); }

  void append_copy(const VehicleState& v, std::int32_t destination);
  void append_delete(std::uint32_t position);

  std::size_t copy_count() const noexcept { return copy_cursor_.load(std::memory_order_acquire); }
  std::size_t delete_count() const noexcept {
    return delete_cursor_.load(std::memory_order_acquire);
  }
  std::span<const CopyRecord> copies() const noexcept { return {copies_.data(), copy_count()}; }
  std::span<const std::uint32_t> deletes() const noexcept {
    return {deletes_.data(), delete_count()};
  }

  /// Throws InvariantViolation if a pool position is listed twice.
  void seal(std::int64_t step) const;

 private:
  std::vector<CopyRecord> copies_;
  std::vector<std::uint32_t> deletes_;
  std::atomic<std::size_t> copy_cursor_{0};
  std::atomic<std::size_t> delete_cursor_{0};
};

/// Applies `source`'s deletes to `pool`.
void apply_deletes(VehiclePool& pool, const TransferBuffer& source, std::int64_t step);

/// Appends copies addressed to `destination`, ordered by source shard then
/// trip id. `live` flags trip indices already in the pool and is updated.
void apply_incoming(VehiclePool& pool, std::int32_t destination,
                    std::span<const TransferBuffer* const> buffers, std::vector<std::uint8_t>& live,
                    std::int64_t step);

/// Deletes first on every shard, then copies.
void apply_transfers(std::span<VehiclePool> pools, std::span<const TransferBuffer* const> buffers,
                     std::int64_t step);

// ---------------------------------------------------------------------------
// Ghost-lane synchronisation

struct ShardLanes {
  const ShardLayout* layout = nullptr;
  std::span<std::uint8_t> cells;
};

/// Merges one ghost edge's range cell by cell: occupied beats free, equal
/// occupants agree, different occupants are a protocol violation.
void sync_ghost_edge(const RoadNetwork& net, const GhostEdge& ge, ShardLanes owner,
                     ShardLanes mirror, std::int64_t step);

void sync_ghost_lanes(const RoadNetwork& net, const GhostZone& ghost, std::span<ShardLanes> shards,
                      std::int64_t step);

struct GhostChecksum {
  EdgeId edge = kNoEdge;
  std::uint64_t owner = 0;
  std::uint64_t mirror = 0;
};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::vector<GhostChecksum> ghost_checksums(const RoadNetwork& net, const GhostZone& ghost,
                                           std::span<const ShardLanes> shards);

}  // namespace lanesim
