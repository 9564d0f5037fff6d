#include "lanesim/network.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

constexpr std::string_view kNodeHeader = "id,x,y,signalized";
constexpr std::string_view kEdgeHeader = "id,from,to,length_m,lanes,free_flow_mps";

void check_edge_values(const Edge& e, const std::string& where) {
  if (!(e.length_m > 0.0))
    throw ValidationError(where + "nonpositive length for edge " + std::to_string(e.external_id));
  if (e.length_m < RoadNetwork::kMinLinkLength)
    throw ValidationError(where + "edge " + std::to_string(e.external_id) +
                          " shorter than the minimum link length of 1 m");
  if (e.lanes < 1)
    throw ValidationError(where + "edge " + std::to_string(e.external_id) + " needs at least one lane");
  if (!(e.free_flow_speed > 0.0) || e.free_flow_speed > kMaxSpeedByte)
    throw ValidationError(where + "edge " + std::to_string(e.external_id) +
                          " free-flow speed outside (0, 254] m/s");
}

}  // namespace

RoadNetwork RoadNetwork::create(std::vector<Node> nodes, std::vector<Edge> edges) {
  RoadNetwork net;
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.external_id < b.external_id; });
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return a.external_id < b.external_id; });

  net.nodes_.reserve(nodes.size());
  for (auto& n : nodes) {
    const auto dense = static_cast<NodeId>(net.nodes_.size());
    if (!net.node_index_.emplace(n.external_id, dense).second)
      throw ValidationError("duplicate node id " + std::to_string(n.external_id));
    n.id = dense;
    net.nodes_.push_back(n);
  }

  net.edges_.reserve(edges.size());
  for (auto& e : edges) {
    const auto dense = static_cast<EdgeId>(net.edges_.size());
    if (!net.edge_index_.emplace(e.external_id, dense).second)
      throw ValidationError("duplicate edge id " + std::to_string(e.external_id));
    // Endpoints arrive as external ids.
    auto from = net.node_index_.find(e.from);
    auto to = net.node_index_.find(e.to);
    if (from == net.node_index_.end() || to == net.node_index_.end())
      throw ValidationError("edge " + std::to_string(e.external_id) + " references missing node " +
                            std::to_string(from == net.node_index_.end() ? e.from : e.to));
    check_edge_values(e, "");
    e.id = dense;
    e.from = from->second;
    e.to = to->second;
    e.lane_map_offset = 0;
    net.edges_.push_back(e);
  }

  net.adjacency_.assign(net.nodes_.size(), {});
  net.incoming_.assign(net.nodes_.size(), {});
  for (const auto& e : net.edges_) {
    net.adjacency_[static_cast<std::size_t>(e.from)].push_back(e.id);
    net.incoming_[static_cast<std::size_t>(e.to)].push_back(e.id);
  }
  return net;
}

std::optional<NodeId> RoadNetwork::find_node(std::int64_t external_id) const {
  if (auto it = node_index_.find(external_id); it != node_index_.end()) return it->second;
  return std::nullopt;
}

std::optional<EdgeId> RoadNetwork::find_edge(std::int64_t external_id) const {
  if (auto it = edge_index_.find(external_id); it != edge_index_.end()) return it->second;
  return std::nullopt;
}

RoadNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open network file " + path.string());
  const std::string file = path.string();

  enum class Section { none, nodes, edges } section = Section::none;
  bool expect_header = false;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::unordered_set<std::int64_t> node_ids;
  std::unordered_set<std::int64_t> edge_ids;
  std::vector<std::size_t> edge_lines;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (text::is_skippable(raw)) continue;
    const auto line = text::trim(raw);
    if (line == "[nodes]") {
      section = Section::nodes;
      expect_header = true;
      continue;
    }
    if (line == "[edges]") {
      section = Section::edges;
      expect_header = true;
      continue;
    }
    if (expect_header) {
      const auto wanted = section == Section::nodes ? kNodeHeader : kEdgeHeader;
      if (line != wanted)
        throw ParseError(file, line_no, "expected header '" + std::string(wanted) + "'");
      expect_header = false;
      continue;
    }
    const auto fields = text::split(line);
    switch (section) {
      case Section::none:
        throw ParseError(file, line_no, "record outside of a [nodes] or [edges] section");
      case Section::nodes: {
        if (fields.size() != 4) throw ParseError(file, line_no, "node record needs 4 fields");
        auto id = text::parse_number<std::int64_t>(fields[0]);
        auto x = text::parse_number<double>(fields[1]);
        auto y = text::parse_number<double>(fields[2]);
        auto sig = text::parse_number<int>(fields[3]);
        if (!id || !x || !y || !sig || (*sig != 0 && *sig != 1))
          throw ParseError(file, line_no, "malformed node record");
        if (!node_ids.insert(*id).second)
          throw ParseError(file, line_no, "duplicate node id " + std::to_string(*id));
        nodes.push_back(Node{0, *id, *x, *y, *sig == 1});
        break;
      }
      case Section::edges: {
        if (fields.size() != 6) throw ParseError(file, line_no, "edge record needs 6 fields");
        auto id = text::parse_number<std::int64_t>(fields[0]);
        auto from = text::parse_number<std::int64_t>(fields[1]);
        auto to = text::parse_number<std::int64_t>(fields[2]);
        auto len = text::parse_number<double>(fields[3]);
        auto lanes = text::parse_number<std::int32_t>(fields[4]);
        auto speed = text::parse_number<double>(fields[5]);
        if (!id || !from || !to || !len || !lanes || !speed)
          throw ParseError(file, line_no, "malformed edge record");
        if (!edge_ids.insert(*id).second)
          throw ParseError(file, line_no, "duplicate edge id " + std::to_string(*id));
        Edge e;
        e.external_id = *id;
        e.from = static_cast<NodeId>(*from);
        e.to = static_cast<NodeId>(*to);
        e.length_m = *len;
        e.lanes = *lanes;
        e.free_flow_speed = *speed;
        try {
          check_edge_values(e, "");
        } catch (const ValidationError& err) {
          throw ParseError(file, line_no, err.what());
        }
        // Keep the raw 64-bit endpoints for the missing-node check below.
        if (*from != e.from || *to != e.to)
          throw ParseError(file, line_no, "node id out of range");
        edges.push_back(e);
        edge_lines.push_back(line_no);
        break;
      }
    }
  }
  if (expect_header) throw ParseError(file, line_no, "section without header");

  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (auto endpoint : {edges[i].from, edges[i].to}) {
      if (!node_ids.contains(endpoint))
        throw ParseError(file, edge_lines[i],
                         "edge " + std::to_string(edges[i].external_id) +
                             " references missing node " + std::to_string(endpoint));
    }
  }
  return RoadNetwork::create(std::move(nodes), std::move(edges));
}

void save_network(const RoadNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write network file " + path.string());
  out << "[nodes]\n" << kNodeHeader << '\n';
  for (const auto& n : net.nodes()) {
    out << n.external_id << ',' << text::format_double(n.x) << ',' << text::format_double(n.y)
        << ',' << (n.signalized ? 1 : 0) << '\n';
  }
  out << "[edges]\n" << kEdgeHeader << '\n';
  for (const auto& e : net.edges()) {
    out << e.external_id << ',' << net.node(e.from).external_id << ','
        << net.node(e.to).external_id << ',' << text::format_double(e.length_m) << ','
        << e.lanes << ',' << text::format_double(e.free_flow_speed) << '\n';
  }
}

RoadNetwork make_grid_network(int cols, int rows, double spacing_m, std::int32_t lanes,
                              double free_flow_mps) {
  if (cols < 2 || rows < 2) throw ValidationError("grid needs at least 2x2 nodes");
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  auto id_of = [cols](int c, int r) { return static_cast<std::int64_t>(r) * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      nodes.push_back(Node{0, id_of(c, r), c * spacing_m, r * spacing_m, false});

  auto add = [&](std::int64_t a, std::int64_t b) {
    Edge e;
    e.external_id = static_cast<std::int64_t>(edges.size());
    e.from = static_cast<NodeId>(a);
    e.to = static_cast<NodeId>(b);
    e.length_m = spacing_m;
    e.lanes = lanes;
    e.free_flow_speed = free_flow_mps;
    edges.push_back(e);
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) {
        add(id_of(c, r), id_of(c + 1, r));
        add(id_of(c + 1, r), id_of(c, r));
      }
      if (r + 1 < rows) {
        add(id_of(c, r), id_of(c, r + 1));
        add(id_of(c, r + 1), id_of(c, r));
      }
    }
  }
  return RoadNetwork::create(std::move(nodes), std::move(edges));
}

// ---------------------------------------------------------------------------

std::size_t LaneMap::occupied_count() const noexcept {
  return cells_.size() -
         static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), kFreeCell));
}

bool LaneMap::claim(std::size_t index, std::uint8_t speed_byte) {
  if (speed_byte == kFreeCell)
    throw std::invalid_argument("speed byte 255 is reserved for free cells");
  std::atomic_ref<std::uint8_t> cell(cells_.at(index));
  std::uint8_t expected = kFreeCell;
  return cell.compare_exchange_strong(expected, speed_byte, std::memory_order_acq_rel);
}

bool claim_cell(LaneMap& map, std::size_t index, std::uint8_t speed_byte) {
  return map.claim(index, speed_byte);
}

LaneMap build_lane_map(RoadNetwork& net, std::size_t budget_bytes) {
  std::size_t offset = 0;
  for (auto& e : net.edges_) {
    const std::size_t fp = e.footprint();
    if (fp > budget_bytes || offset > budget_bytes - fp)
      throw ValidationError("lane map exceeds the memory budget of " +
                            std::to_string(budget_bytes) + " bytes");
    e.lane_map_offset = offset;
    offset += fp;
  }
  net.lane_map_size_ = offset;
  return LaneMap(offset);
}

CellRef locate_cell(const RoadNetwork& net, std::size_t index) {
  const auto& edges = net.edges();
  if (edges.empty() || index >= net.lane_map_size())
    throw std::out_of_range("cell index outside the lane map");
  auto it = std::upper_bound(edges.begin(), edges.end(), index,
                             [](std::size_t i, const Edge& e) { return i < e.lane_map_offset; });
  // Zero-footprint edges cannot exist (length >= 1, lanes >= 1).
  const Edge& e = *std::prev(it);
  const std::size_t local = index - e.lane_map_offset;
  const auto cells = static_cast<std::size_t>(e.cells());
  return CellRef{e.id, static_cast<std::int32_t>(local / cells),
                 static_cast<std::int32_t>(local % cells)};
}

std::optional<Probe> probe_ahead(std::span<const std::uint8_t> lane_cells, std::int32_t pos,
                                 std::int32_t horizon) {
  const auto n = static_cast<std::int32_t>(lane_cells.size());
  const std::int32_t last = std::min<std::int64_t>(n - 1, std::int64_t{pos} + horizon);
  for (std::int32_t i = pos + 1; i <= last; ++i) {
    const auto b = lane_cells[static_cast<std::size_t>(i)];
    if (b != kFreeCell) return Probe{i - pos, decode_speed(b)};
  }
  return std::nullopt;
}

std::optional<Probe> probe_behind(std::span<const std::uint8_t> lane_cells, std::int32_t pos,
                                  std::int32_t horizon) {
  const std::int32_t first = std::max<std::int64_t>(0, std::int64_t{pos} - horizon);
  for (std::int32_t i = pos - 1; i >= first; --i) {
    const auto b = lane_cells[static_cast<std::size_t>(i)];
    if (b != kFreeCell) return Probe{pos - i, decode_speed(b)};
  }
  return std::nullopt;
}

std::optional<Probe> probe_ahead(const LaneMap& map, const Edge& edge, std::int32_t lane,
                                 std::int32_t pos, std::int32_t horizon) {
  const auto lane_span = map.bytes().subspan(cell_index(edge, lane, 0),
                                             static_cast<std::size_t>(edge.cells()));
  return probe_ahead(lane_span, pos, horizon);
}

}  // namespace lanesim
