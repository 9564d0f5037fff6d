#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>

#include "lanesim/demand.hpp"
#include "lanesim/network.hpp"

namespace lanesim {

// ---------------------------------------------------------------------------
// Parameters

struct IdmParams {
  double a = 1.5;              // max acceleration, m/s^2
  double b = 2.0;              // comfortable braking, m/s^2
  double delta = 4.0;          // acceleration exponent
  double s0 = 2.0;             // standstill spacing, m
  double time_headway = 1.5;   // desired time headway, s
  double emergency_brake = 0;  // deceleration floor, m/s^2; 0 means 2b

  double max_decel() const noexcept { return emergency_brake > 0 ? emergency_brake : 2.0 * b; }
  void validate() const;
};

struct LaneChangeParams {
  double x0 = 100.0;  // trigger distance to the exit, m
  void validate() const;
};

struct GapParams {
  double g_a = 1.0;      // desired lead gap, m
  double g_b = 1.5;      // desired lag gap, m
  double alpha_a = 0.2;  // lead anticipation time, s
  double alpha_b = 0.3;  // lag anticipation time, s
  double alpha_i = 0.1;  // subject anticipation time, s
  double sigma_a = 0.5;  // std-dev of the lead random term
  double sigma_b = 0.5;  // std-dev of the lag random term
  void validate() const;
};

struct DynamicsConfig {
  double dt = 0.5;               // superstep length, s
  IdmParams idm;
  LaneChangeParams lane_change;
  GapParams gap;
  double signal_cycle_s = 60.0;  // two-phase fixed cycle at signalized nodes
  std::uint64_t seed = 1;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Counter-based randomness: draws depend only on (seed, trip, step), never on
// which worker evaluates the vehicle or in what order.

class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept
      : state_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL) ^ mix(counter * 0xbf58476d1ce4e5b9ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Vehicle state

enum class Phase : std::uint8_t { waiting, on_road, in_ghost, finished, marked_for_removal };

struct VehicleState {
  std::int64_t trip_id = 0;
  std::int32_t trip_index = 0;  // position in the run's trip table
  std::int32_t route_pos = 0;   // index of cur_edge within the route
  EdgeId prev_edge = kNoEdge;
  EdgeId cur_edge = kNoEdge;
  EdgeId next_edge = kNoEdge;
  std::int32_t lane = 0;
  double offset_m = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double edge_entry_time = 0.0;
  double enter_network_time = std::numeric_limits<double>::quiet_NaN();
  double distance_m = 0.0;  // length of fully traversed edges
  Phase phase = Phase::waiting;
  VehicleType type = VehicleType::car;

  std::int32_t cell() const noexcept { return static_cast<std::int32_t>(offset_m); }
  bool on_road() const noexcept { return phase == Phase::on_road || phase == Phase::in_ghost; }
};

/// Bitwise comparison; NaN fields compare equal to themselves.
bool same_state(const VehicleState& a, const VehicleState& b) noexcept;

// ---------------------------------------------------------------------------
// Closed-form laws

/// a [1 - (v/v0)^delta - (s*/s)^2], s* = s0 + v T + v dv / (2 sqrt(a b)),
/// floored at -max_decel. Throws std::invalid_argument for s <= 0.
double idm_accel(double v, double v0, double s, double dv, const IdmParams& p);

/// Limit s -> infinity of idm_accel: a [1 - (v/v0)^delta].
double idm_free_accel(double v, double v0, const IdmParams& p);

/// Spacing at which idm_accel vanishes for dv = 0.
double idm_equilibrium_gap(double v, double v0, const IdmParams& p);

/// clamp((x0 - x) / x0, 0, 1).
double mandatory_lc_probability(double x, const LaneChangeParams& p);

struct GapDraws {
  double eps_lead = 0.0;
  double eps_lag = 0.0;
};

struct CriticalGaps {
  double lead = 0.0;
  double lag = 0.0;
};

CriticalGaps critical_gaps(double subject_speed, double v_lead, double v_lag, const GapParams& p,
                           const GapDraws& draws);

/// Accepts iff both available gaps reach their critical values.
bool gap_accept(const VehicleState& subject, double lead_gap, double lag_gap, double v_lead,
                double v_lag, const GapParams& p, const GapDraws& draws);

// ---------------------------------------------------------------------------
// One propagation step

/// Read-only step-k lane bytes as seen by one shard. `edge_offset[e]` is the
/// position of edge e in `cells`, or -1 if the shard does not hold it.
struct LaneAccess {
  std::span<const std::uint8_t> cells;
  std::span<const std::int64_t> edge_offset;

  bool visible(EdgeId e) const noexcept { return edge_offset[static_cast<std::size_t>(e)] >= 0; }
  std::span<const std::uint8_t> lane(const Edge& e, std::int32_t lane_index) const;
  std::uint8_t at(const Edge& e, std::int32_t lane_index, std::int32_t pos) const {
    return lane(e, lane_index)[static_cast<std::size_t>(pos)];
  }
};

struct WorldView {
  const RoadNetwork& net;
  LaneAccess lanes;
  std::span<const std::int32_t> node_shard;  // empty: every node is local
  std::int32_t shard = 0;
  double now = 0.0;
  std::int64_t step = 0;
  const DynamicsConfig& cfg;

  bool owns_node(NodeId n) const noexcept {
    return node_shard.empty() || node_shard[static_cast<std::size_t>(n)] == shard;
  }
};

enum class StepKind : std::uint8_t {
  wait,         // still waiting to depart
  move,         // stays on its edge, possibly after a lane change
  depart,       // claims the first cell of its first edge
  enter_edge,   // crosses an intersection onto the next route edge
  finish,       // passes the end of its last edge
  handoff,      // reached a node this shard does not own
};

struct StepOutcome {
  StepKind kind = StepKind::wait;
  VehicleState next;
  /// Cell the next state occupies; absent when the vehicle leaves the road.
  std::optional<CellRef> target;
  std::uint8_t speed_byte = 0;
  bool lane_changed = false;
  /// The step reached the end node of the current edge.
  bool at_node = false;
  /// Where the vehicle stays if its claim is lost: its own step-k cell, at rest.
  VehicleState fallback;
};

/// Two-phase fixed cycle: approaches running mostly east-west get the first
/// half of the cycle, north-south ones the second.
bool signal_green(const RoadNetwork& net, const Edge& approach, double now, double cycle_s);

/// Lane to aim for on `edge` when the route continues with `following`.
std::int32_t required_lane(const RoadNetwork& net, const Edge& edge, EdgeId following);

/// Pure function of the step-k snapshot and the vehicle's own state.
StepOutcome step_vehicle(const VehicleState& v, std::span<const EdgeId> route, const Trip& trip,
                         const WorldView& world);

}  // namespace lanesim
