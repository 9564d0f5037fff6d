#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lanesim {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;
inline constexpr EdgeId kNoEdge = -1;

class LaneMap;

struct Node {
  NodeId id = 0;               // dense index 0..N-1
  std::int64_t external_id = 0;  // id as written in the network file
  double x = 0.0;
  double y = 0.0;
  bool signalized = false;
};

struct Edge {
  EdgeId id = 0;               // dense index; lane-map layout follows this order
  std::int64_t external_id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
  std::int32_t lanes = 1;
  double free_flow_speed = 0.0;  // m/s
  std::size_t lane_map_offset = 0;

  /// Cells per lane: one byte per started meter.
  std::int32_t cells() const noexcept {
    return static_cast<std::int32_t>(std::ceil(length_m));
  }
  std::size_t footprint() const noexcept {
    return static_cast<std::size_t>(lanes) * static_cast<std::size_t>(cells());
  }
};

/// Directed multigraph of intersections and road segments. Immutable after
/// construction except for the lane-map offsets assigned by build_lane_map.
class RoadNetwork {
 public:
  static constexpr double kMinLinkLength = 1.0;

  RoadNetwork() = default;

  /// Validates and densifies externally numbered nodes and edges. Nodes and
  /// edges are reindexed in ascending external-id order.
  static RoadNetwork create(std::vector<Node> nodes, std::vector<Edge> edges);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Edge& edge(EdgeId id) const { return edges_.at(static_cast<std::size_t>(id)); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  /// Outgoing edge ids per node, ascending.
  std::span<const EdgeId> out_edges(NodeId n) const {
    return adjacency_.at(static_cast<std::size_t>(n));
  }
  std::span<const EdgeId> in_edges(NodeId n) const {
    return incoming_.at(static_cast<std::size_t>(n));
  }

  std::optional<NodeId> find_node(std::int64_t external_id) const;
  std::optional<EdgeId> find_edge(std::int64_t external_id) const;

  double min_link_length() const noexcept { return kMinLinkLength; }

  /// Total lane-map bytes the current offsets describe.
  std::size_t lane_map_size() const noexcept { return lane_map_size_; }

  friend LaneMap build_lane_map(RoadNetwork& net, std::size_t budget_bytes);

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> adjacency_;
  std::vector<std::vector<EdgeId>> incoming_;
  std::unordered_map<std::int64_t, NodeId> node_index_;
  std::unordered_map<std::int64_t, EdgeId> edge_index_;
  std::size_t lane_map_size_ = 0;
};

/// Parses the two-section network text format (see README). Offsets are not
/// assigned; call build_lane_map afterwards.
RoadNetwork load_network(const std::filesystem::path& path);
void save_network(const RoadNetwork& net, const std::filesystem::path& path);

/// n x m grid with 4-neighbour links in both directions.
RoadNetwork make_grid_network(int cols, int rows, double spacing_m = 100.0,
                              std::int32_t lanes = 1, double free_flow_mps = 13.9);

// ---------------------------------------------------------------------------
// Lane map

inline constexpr std::uint8_t kFreeCell = 255;
inline constexpr std::uint8_t kMaxSpeedByte = 254;

/// floor(clamp(v, 0, 254)).
inline std::uint8_t encode_speed(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= kMaxSpeedByte) return kMaxSpeedByte;
  return static_cast<std::uint8_t>(v);
}
inline double decode_speed(std::uint8_t b) noexcept { return static_cast<double>(b); }

/// Flat byte image of all lanes, one byte per meter. 255 marks a free cell,
/// 0..254 a vehicle head with its speed in m/s.
class LaneMap {
 public:
  LaneMap() = default;
  explicit LaneMap(std::size_t size) : cells_(size, kFreeCell) {}

  std::size_t size() const noexcept { return cells_.size(); }
  std::uint8_t operator[](std::size_t i) const noexcept { return cells_[i]; }
  std::uint8_t at(std::size_t i) const { return cells_.at(i); }

  std::span<const std::uint8_t> bytes() const noexcept { return cells_; }
  std::span<std::uint8_t> bytes() noexcept { return cells_; }

  void set(std::size_t i, std::uint8_t value) { cells_.at(i) = value; }
  void clear() noexcept { std::fill(cells_.begin(), cells_.end(), kFreeCell); }
  std::size_t occupied_count() const noexcept;

  /// Atomic 255 -> speed_byte transition. Exactly one of several concurrent
  /// callers on the same free cell succeeds. speed_byte 255 is rejected.
  bool claim(std::size_t index, std::uint8_t speed_byte);

  friend bool operator==(const LaneMap&, const LaneMap&) = default;

 private:
  std::vector<std::uint8_t> cells_;
};

inline constexpr std::size_t kDefaultLaneMapBudget = std::size_t{1} << 32;

/// Lays edges out contiguously in id order, records each edge's offset and
/// returns an all-free map.
LaneMap build_lane_map(RoadNetwork& net, std::size_t budget_bytes = kDefaultLaneMapBudget);

struct CellRef {
  EdgeId edge = kNoEdge;
  std::int32_t lane = 0;
  std::int32_t pos = 0;
  friend bool operator==(const CellRef&, const CellRef&) = default;
};

inline std::size_t cell_index(const Edge& e, std::int32_t lane, std::int32_t pos) noexcept {
  return e.lane_map_offset + static_cast<std::size_t>(lane) * static_cast<std::size_t>(e.cells()) +
         static_cast<std::size_t>(pos);
}

/// Inverse of cell_index over the whole network.
CellRef locate_cell(const RoadNetwork& net, std::size_t index);

struct Probe {
  std::int32_t gap_m = 0;
  double front_speed = 0.0;
  friend bool operator==(const Probe&, const Probe&) = default;
};

/// Nearest occupied cell strictly ahead of `pos` within `horizon` cells on
/// one lane. `lane_cells` is the lane starting at pos 0; the scan never
/// leaves it.
std::optional<Probe> probe_ahead(std::span<const std::uint8_t> lane_cells, std::int32_t pos,
                                 std::int32_t horizon);
/// Nearest occupied cell strictly behind `pos` within `horizon` cells.
std::optional<Probe> probe_behind(std::span<const std::uint8_t> lane_cells, std::int32_t pos,
                                  std::int32_t horizon);

std::optional<Probe> probe_ahead(const LaneMap& map, const Edge& edge, std::int32_t lane,
                                 std::int32_t pos, std::int32_t horizon);

bool claim_cell(LaneMap& map, std::size_t index, std::uint8_t speed_byte);

}  // namespace lanesim
