#include "lanesim/dynamics.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "lanesim/error.hpp"

namespace lanesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool bits_equal(double a, double b) noexcept {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

/// First lane of `edge` whose entry cell is free, trying the lane the route
/// needs next before the others.
std::optional<std::int32_t> pick_entry_lane(const WorldView& w, const Edge& edge,
                                            EdgeId following) {
  if (!w.lanes.visible(edge.id))
    throw std::logic_error("entry edge " + std::to_string(edge.id) + " not held by shard " +
                           std::to_string(w.shard));
  const std::int32_t preferred =
      following == kNoEdge ? 0 : required_lane(w.net, edge, following);
  if (w.lanes.at(edge, preferred, 0) == kFreeCell) return preferred;
  for (std::int32_t l = 0; l < edge.lanes; ++l) {
    if (l != preferred && w.lanes.at(edge, l, 0) == kFreeCell) return l;
  }
  return std::nullopt;
}

VehicleState at_rest(VehicleState v) {
  if (v.on_road()) {
    v.speed = 0.0;
    v.accel = 0.0;
  }
  return v;
}

}  // namespace

void IdmParams::validate() const {
  if (!(a > 0) || !(b > 0) || !(delta > 0) || !(s0 >= 0) || !(time_headway >= 0) ||
      !(emergency_brake >= 0))
    throw ValidationError("IDM parameters need a>0, b>0, delta>0, s0>=0, T>=0");
}

void LaneChangeParams::validate() const {
  if (!(x0 > 0)) throw ValidationError("lane-change trigger distance x0 must be positive");
}

void GapParams::validate() const {
  if (!(g_a >= 0) || !(g_b >= 0) || !(alpha_a >= 0) || !(alpha_b >= 0) || !(alpha_i >= 0) ||
      !(sigma_a >= 0) || !(sigma_b >= 0))
    throw ValidationError("gap-acceptance parameters must be nonnegative");
}

void DynamicsConfig::validate() const {
  if (!(dt > 0)) throw ValidationError("dt must be positive");
  if (!(signal_cycle_s > 0)) throw ValidationError("signal cycle must be positive");
  idm.validate();
  lane_change.validate();
  gap.validate();
}

bool same_state(const VehicleState& a, const VehicleState& b) noexcept {
  return a.trip_id == b.trip_id && a.trip_index == b.trip_index && a.route_pos == b.route_pos &&
         a.prev_edge == b.prev_edge && a.cur_edge == b.cur_edge && a.next_edge == b.next_edge &&
         a.lane == b.lane && bits_equal(a.offset_m, b.offset_m) && bits_equal(a.speed, b.speed) &&
         bits_equal(a.accel, b.accel) && bits_equal(a.edge_entry_time, b.edge_entry_time) &&
         bits_equal(a.enter_network_time, b.enter_network_time) &&
         bits_equal(a.distance_m, b.distance_m) && a.phase == b.phase && a.type == b.type;
}

double idm_accel(double v, double v0, double s, double dv, const IdmParams& p) {
  if (!(s > 0)) throw std::invalid_argument("IDM gap must be positive");
  const double s_star = p.s0 + v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a * p.b));
  const double ratio = s_star / s;
  const double raw = p.a * (1.0 - std::pow(v / v0, p.delta) - ratio * ratio);
  return std::max(raw, -p.max_decel());
}

double idm_free_accel(double v, double v0, const IdmParams& p) {
  return std::max(p.a * (1.0 - std::pow(v / v0, p.delta)), -p.max_decel());
}

double idm_equilibrium_gap(double v, double v0, const IdmParams& p) {
  const double rel = 1.0 - std::pow(v / v0, p.delta);
  if (!(rel > 0)) return kInf;
  return (p.s0 + v * p.time_headway) / std::sqrt(rel);
}

double mandatory_lc_probability(double x, const LaneChangeParams& p) {
  return std::clamp((p.x0 - x) / p.x0, 0.0, 1.0);
}

CriticalGaps critical_gaps(double subject_speed, double v_lead, double v_lag, const GapParams& p,
                           const GapDraws& draws) {
  return CriticalGaps{
      std::max(0.0, p.g_a + p.alpha_a * v_lead - p.alpha_i * subject_speed + draws.eps_lead),
      std::max(0.0, p.g_b + p.alpha_b * v_lag - p.alpha_i * subject_speed + draws.eps_lag)};
}

bool gap_accept(const VehicleState& subject, double lead_gap, double lag_gap, double v_lead,
                double v_lag, const GapParams& p, const GapDraws& draws) {
  const auto crit = critical_gaps(subject.speed, v_lead, v_lag, p, draws);
  return lead_gap >= crit.lead && lag_gap >= crit.lag;
}

std::span<const std::uint8_t> LaneAccess::lane(const Edge& e, std::int32_t lane_index) const {
  const auto base = edge_offset[static_cast<std::size_t>(e.id)];
  if (base < 0) throw std::logic_error("edge " + std::to_string(e.id) + " is not held locally");
  const auto per_lane = static_cast<std::size_t>(e.cells());
  return cells.subspan(static_cast<std::size_t>(base) +
                           static_cast<std::size_t>(lane_index) * per_lane,
                       per_lane);
}

bool signal_green(const RoadNetwork& net, const Edge& approach, double now, double cycle_s) {
  const Node& from = net.node(approach.from);
  const Node& to = net.node(approach.to);
  const int phase = std::abs(to.x - from.x) >= std::abs(to.y - from.y) ? 0 : 1;
  const auto half = static_cast<std::int64_t>(std::floor(now / (0.5 * cycle_s)));
  return (half % 2) == phase;
}

std::int32_t required_lane(const RoadNetwork& net, const Edge& edge, EdgeId following) {
  if (edge.lanes <= 1) return 0;
  const auto outs = net.out_edges(edge.to);
  const auto it = std::find(outs.begin(), outs.end(), following);
  if (it == outs.end()) return 0;
  const auto rank = static_cast<std::int64_t>(it - outs.begin());
  return static_cast<std::int32_t>(rank * edge.lanes / static_cast<std::int64_t>(outs.size()));
}

StepOutcome step_vehicle(const VehicleState& v, std::span<const EdgeId> route, const Trip& trip,
                         const WorldView& w) {
  const auto& cfg = w.cfg;
  const double dt = cfg.dt;
  const double t_next = w.now + dt;
  StepOutcome out;
  out.next = v;
  out.fallback = at_rest(v);

  if (v.phase == Phase::waiting) {
    if (w.now < trip.depart_s) return out;
    const Edge& first = w.net.edge(route.front());
    const EdgeId following = route.size() > 1 ? route[1] : kNoEdge;
    const auto lane = pick_entry_lane(w, first, following);
    if (!lane) return out;
    VehicleState& n = out.next;
    n.phase = Phase::on_road;
    n.route_pos = 0;
    n.prev_edge = kNoEdge;
    n.cur_edge = first.id;
    n.next_edge = following;
    n.lane = *lane;
    n.offset_m = 0.0;
    n.speed = 0.0;
    n.accel = 0.0;
    n.edge_entry_time = t_next;
    n.enter_network_time = t_next;
    out.kind = StepKind::depart;
    out.target = CellRef{first.id, *lane, 0};
    out.speed_byte = encode_speed(0.0);
    return out;
  }

  if (!v.on_road()) throw std::logic_error("step_vehicle on a vehicle that is not on the road");
  if (v.route_pos < 0 || static_cast<std::size_t>(v.route_pos) >= route.size() ||
      route[static_cast<std::size_t>(v.route_pos)] != v.cur_edge)
    throw std::logic_error("route cursor of trip " + std::to_string(v.trip_id) + " is broken");

  const Edge& e = w.net.edge(v.cur_edge);
  const std::int32_t cells = e.cells();
  const std::int32_t c = v.cell();
  const double v0 = e.free_flow_speed;
  const auto lane_cells = w.lanes.lane(e, v.lane);
  const auto& idm = cfg.idm;

  // Car following inside the look-ahead window.
  const double d_front = 2.0 * dt * v.speed;
  const auto front = probe_ahead(lane_cells, c, static_cast<std::int32_t>(std::ceil(d_front)));
  double accel = front ? idm_accel(v.speed, v0, front->gap_m, v.speed - front->front_speed, idm)
                       : idm_free_accel(v.speed, v0, idm);

  double v_new = v.speed + accel * dt;
  double disp;
  if (v_new < 0.0) {
    disp = v.speed * v.speed / (2.0 * -accel);
    v_new = 0.0;
  } else {
    disp = v.speed * dt + 0.5 * accel * dt * dt;
  }
  v_new = std::min(v_new, std::max(v0, v.speed));
  v_new = std::min(v_new, static_cast<double>(kMaxSpeedByte));
  double target = v.offset_m + disp;

  // Never end a step closer than the standstill spacing to a step-k occupant.
  const double spacing = std::max(idm.s0, 1.0);
  const auto reach = static_cast<std::int32_t>(std::ceil(target)) - c +
                     static_cast<std::int32_t>(std::ceil(spacing)) + 1;
  const auto leader = probe_ahead(lane_cells, c, std::max(reach, 1));
  if (leader) {
    const double leader_pos = static_cast<double>(c + leader->gap_m);
    const double limit = leader_pos - v.offset_m >= spacing ? leader_pos - spacing : v.offset_m;
    if (target > limit) {
      target = std::max(v.offset_m, limit);
      v_new = std::min(v_new, (target - v.offset_m) / dt);
    }
  }
  VehicleState& n = out.next;
  n.accel = accel;

  const bool at_end = target >= cells || (!leader && c == cells - 1);
  if (at_end) {
    out.at_node = true;
    if (!w.owns_node(e.to)) {
      out.kind = StepKind::handoff;
      return out;
    }
    const bool last = static_cast<std::size_t>(v.route_pos) + 1 == route.size();
    if (last) {
      n.phase = Phase::finished;
      n.speed = v_new;
      n.offset_m = static_cast<double>(cells);
      n.distance_m = v.distance_m + e.length_m;
      out.kind = StepKind::finish;
      return out;
    }
    const bool green = !w.net.node(e.to).signalized ||
                       signal_green(w.net, e, w.now, cfg.signal_cycle_s);
    if (green) {
      const Edge& nxt = w.net.edge(route[static_cast<std::size_t>(v.route_pos) + 1]);
      const std::size_t after = static_cast<std::size_t>(v.route_pos) + 2;
      const EdgeId following = after < route.size() ? route[after] : kNoEdge;
      if (const auto lane = pick_entry_lane(w, nxt, following)) {
        n.prev_edge = e.id;
        n.cur_edge = nxt.id;
        n.next_edge = following;
        n.route_pos = v.route_pos + 1;
        n.lane = *lane;
        n.offset_m = 0.0;
        n.speed = std::min(v_new, nxt.free_flow_speed);
        n.edge_entry_time = t_next;
        n.distance_m = v.distance_m + e.length_m;
        out.kind = StepKind::enter_edge;
        out.target = CellRef{nxt.id, *lane, 0};
        out.speed_byte = encode_speed(n.speed);
        return out;
      }
    }
    // Blocked downstream or red: wait in the last cell.
    n.offset_m = static_cast<double>(cells - 1);
    n.speed = 0.0;
    n.accel = std::min(accel, 0.0);
    out.kind = StepKind::move;
    out.target = CellRef{e.id, v.lane, cells - 1};
    out.speed_byte = 0;
    return out;
  }

  n.offset_m = target;
  n.speed = v_new;
  const std::int32_t nc = n.cell();
  std::int32_t lane = v.lane;

  // Mandatory lane change toward the lane the next turn needs.
  if (e.lanes > 1 && v.next_edge != kNoEdge) {
    const std::int32_t wanted = required_lane(w.net, e, v.next_edge);
    if (wanted != v.lane) {
      CounterRng rng(cfg.seed, static_cast<std::uint64_t>(v.trip_id),
                     static_cast<std::uint64_t>(w.step));
      const double x = std::max(0.0, static_cast<double>(cells - 1) - target);
      const double m = mandatory_lc_probability(x, cfg.lane_change);
      const double u = rng.uniform();
      if (u < m) {
        const std::int32_t tl = v.lane + (wanted > v.lane ? 1 : -1);
        const auto other = w.lanes.lane(e, tl);
        // Entry and exit cells are left to vehicles crossing the node.
        if (nc >= 1 && nc < cells - 1 && other[static_cast<std::size_t>(nc)] == kFreeCell) {
          const auto lead = probe_ahead(other, nc, cells);
          const auto lag = probe_behind(other, nc, cells);
          std::normal_distribution<double> std_normal;
          GapDraws draws;
          draws.eps_lead = cfg.gap.sigma_a * std_normal(rng);
          draws.eps_lag = cfg.gap.sigma_b * std_normal(rng);
          const double lead_gap = lead ? lead->gap_m : kInf;
          const double lag_gap = lag ? lag->gap_m : kInf;
          const double v_lead = lead ? lead->front_speed : 0.0;
          const double v_lag = lag ? lag->front_speed : 0.0;
          if (gap_accept(v, lead_gap, lag_gap, v_lead, v_lag, cfg.gap, draws)) {
            lane = tl;
            out.lane_changed = true;
          }
        }
      }
    }
  }
  n.lane = lane;
  out.kind = StepKind::move;
  out.target = CellRef{e.id, lane, nc};
  out.speed_byte = encode_speed(v_new);
  return out;
}

}  // namespace lanesim
