#include "lanesim/shard_runtime.hpp"

#include <algorithm>
#include <string>

#include "lanesim/error.hpp"

namespace lanesim {

GhostZone::GhostZone(std::vector<GhostEdge> edges, std::size_t edge_count)
    : edges_(std::move(edges)), slot_(edge_count, -1) {
  for (std::size_t i = 0; i < edges_.size(); ++i)
    slot_.at(static_cast<std::size_t>(edges_[i].edge)) = static_cast<std::int32_t>(i);
}

GhostZone identify_ghost_edges(const PartitionAssignment& assignment, const RoadNetwork& net) {
  if (assignment.shard_of.size() != net.node_count())
    throw ValidationError("partition does not match the network");
  assignment.validate();
  std::vector<GhostEdge> ghosts;
  for (const Edge& e : net.edges()) {
    const auto a = assignment[static_cast<std::size_t>(e.from)];
    const auto b = assignment[static_cast<std::size_t>(e.to)];
    if (a != b) ghosts.push_back(GhostEdge{e.id, a, b});
  }
  return GhostZone(std::move(ghosts), net.edge_count());
}

ShardLayout make_shard_layout(const RoadNetwork& net, const PartitionAssignment& assignment,
                              std::int32_t shard) {
  ShardLayout l;
  l.shard = shard;
  l.edge_offset.assign(net.edge_count(), -1);
  for (const Edge& e : net.edges()) {
    if (assignment[static_cast<std::size_t>(e.from)] != shard &&
        assignment[static_cast<std::size_t>(e.to)] != shard)
      continue;
    l.edges.push_back(e.id);
    l.edge_offset[static_cast<std::size_t>(e.id)] = static_cast<std::int64_t>(l.bytes);
    l.bytes += e.footprint();
  }
  return l;
}

MoveDecision classify_vehicle_move(const VehicleState& next, StepKind kind, const GhostZone& ghost,
                                   const PartitionAssignment& assignment, std::int32_t shard,
                                   const RoadNetwork& net) {
  if (kind == StepKind::handoff) {
    const Edge& e = net.edge(next.cur_edge);
    if (assignment[static_cast<std::size_t>(e.to)] == shard || !ghost.contains(e.id))
      throw std::logic_error("handoff of trip " + std::to_string(next.trip_id) +
                             " off an edge that is not a ghost edge leaving shard " +
                             std::to_string(shard));
    return MoveDecision{MoveAction::handoff_delete, -1};
  }
  if (kind == StepKind::enter_edge || kind == StepKind::depart) {
    if (const GhostEdge* ge = ghost.find(next.cur_edge)) {
      if (ge->owner != shard)
        throw std::logic_error("trip " + std::to_string(next.trip_id) +
                               " entered ghost edge on a shard that does not own its start");
      return MoveDecision{MoveAction::replicate, ge->mirror};
    }
  }
  return MoveDecision{MoveAction::local, -1};
}

// ---------------------------------------------------------------------------

void VehiclePool::erase_positions(std::vector<std::uint32_t> positions) {
  std::sort(positions.begin(), positions.end(), std::greater<>());
  for (std::uint32_t p : positions) {
    if (p >= items_.size()) throw std::out_of_range("pool position out of range");
    if (p + 1 != items_.size()) items_[p] = items_.back();
    items_.pop_back();
  }
}

TransferBuffer::TransferBuffer(TransferBuffer&& other) noexcept
    : copies_(std::move(other.copies_)),
      deletes_(std::move(other.deletes_)),
      copy_cursor_(other.copy_cursor_.load()),
      delete_cursor_(other.delete_cursor_.load()) {}

TransferBuffer& TransferBuffer::operator=(TransferBuffer&& other) noexcept {
  copies_ = std::move(other.copies_);
  deletes_ = std::move(other.deletes_);
  copy_cursor_.store(other.copy_cursor_.load());
  delete_cursor_.store(other.delete_cursor_.load());
  return *this;
}

void TransferBuffer::reset(std::size_t capacity) {
  if (copies_.size() < capacity) {
    copies_.resize(capacity);
    deletes_.resize(capacity);
  }
  copy_cursor_.store(0, std::memory_order_relaxed);
  delete_cursor_.store(0, std::memory_order_relaxed);
}

void TransferBuffer::append_copy(const VehicleState& v, std::int32_t destination) {
  const auto slot = copy_cursor_.fetch_add(1, std::memory_order_acq_rel);
  if (slot >= copies_.size()) throw std::length_error("transfer buffer full (copies)");
  copies_[slot] = CopyRecord{v, destination};
}

void TransferBuffer::append_delete(std::uint32_t position) {
  const auto slot = delete_cursor_.fetch_add(1, std::memory_order_acq_rel);
  if (slot >= deletes_.size()) throw std::length_error("transfer buffer full (deletes)");
  deletes_[slot] = position;
}

void TransferBuffer::seal(std::int64_t step) const {
  std::vector<std::uint32_t> d(deletes().begin(), deletes().end());
  std::sort(d.begin(), d.end());
  if (std::adjacent_find(d.begin(), d.end()) != d.end())
    throw InvariantViolation(step, "pool position listed twice for deletion");
}

void apply_deletes(VehiclePool& pool, const TransferBuffer& source, std::int64_t step) {
  source.seal(step);
  for (auto p : source.deletes())
    if (p >= pool.size()) throw InvariantViolation(step, "deletion beyond the pool end");
  pool.erase_positions({source.deletes().begin(), source.deletes().end()});
}

void apply_incoming(VehiclePool& pool, std::int32_t destination,
                    std::span<const TransferBuffer* const> buffers, std::vector<std::uint8_t>& live,
                    std::int64_t step) {
  std::vector<const VehicleState*> batch;
  for (const TransferBuffer* b : buffers) {
    batch.clear();
    for (const auto& rec : b->copies())
      if (rec.destination == destination) batch.push_back(&rec.vehicle);
    std::stable_sort(batch.begin(), batch.end(),
                     [](auto* x, auto* y) { return x->trip_id < y->trip_id; });
    for (const VehicleState* v : batch) {
      const auto idx = static_cast<std::size_t>(v->trip_index);
      if (idx >= live.size()) live.resize(idx + 1, 0);
      if (live[idx])
        throw InvariantViolation(step, "trip " + std::to_string(v->trip_id) +
                                           " is already live on shard " +
                                           std::to_string(destination));
      live[idx] = 1;
      pool.push(*v);
    }
  }
}

void apply_transfers(std::span<VehiclePool> pools, std::span<const TransferBuffer* const> buffers,
                     std::int64_t step) {
  if (pools.size() != buffers.size()) throw std::invalid_argument("one buffer per pool expected");
  for (std::size_t s = 0; s < pools.size(); ++s) apply_deletes(pools[s], *buffers[s], step);
  for (std::size_t s = 0; s < pools.size(); ++s) {
    std::vector<std::uint8_t> live;
    for (const auto& v : pools[s].items()) {
      const auto idx = static_cast<std::size_t>(v.trip_index);
      if (idx >= live.size()) live.resize(idx + 1, 0);
      live[idx] = 1;
    }
    apply_incoming(pools[s], static_cast<std::int32_t>(s), buffers, live, step);
  }
}

// ---------------------------------------------------------------------------

namespace {

std::span<std::uint8_t> edge_range(const RoadNetwork& net, EdgeId e, ShardLanes lanes) {
  const auto off = lanes.layout->edge_offset[static_cast<std::size_t>(e)];
  if (off < 0) throw std::logic_error("ghost edge missing from a shard layout");
  return lanes.cells.subspan(static_cast<std::size_t>(off), net.edge(e).footprint());
}

}  // namespace

void sync_ghost_edge(const RoadNetwork& net, const GhostEdge& ge, ShardLanes owner,
                     ShardLanes mirror, std::int64_t step) {
  auto a = edge_range(net, ge.edge, owner);
  auto b = edge_range(net, ge.edge, mirror);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    if (a[i] == kFreeCell) {
      a[i] = b[i];
    } else if (b[i] == kFreeCell) {
      b[i] = a[i];
    } else {
      throw InvariantViolation(step, "ghost edge " + std::to_string(net.edge(ge.edge).external_id) +
                                         " cell " + std::to_string(i) +
                                         " has different occupants on shards " +
                                         std::to_string(ge.owner) + " and " +
                                         std::to_string(ge.mirror));
    }
  }
}

void sync_ghost_lanes(const RoadNetwork& net, const GhostZone& ghost, std::span<ShardLanes> shards,
                      std::int64_t step) {
  for (const auto& ge : ghost.edges())
    sync_ghost_edge(net, ge, shards[static_cast<std::size_t>(ge.owner)],
                    shards[static_cast<std::size_t>(ge.mirror)], step);
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<GhostChecksum> ghost_checksums(const RoadNetwork& net, const GhostZone& ghost,
                                           std::span<const ShardLanes> shards) {
  std::vector<GhostChecksum> out;
  out.reserve(ghost.size());
  for (const auto& ge : ghost.edges()) {
    out.push_back(GhostChecksum{
        ge.edge, fnv1a(edge_range(net, ge.edge, shards[static_cast<std::size_t>(ge.owner)])),
        fnv1a(edge_range(net, ge.edge, shards[static_cast<std::size_t>(ge.mirror)]))});
  }
  return out;
}

}  // namespace lanesim
