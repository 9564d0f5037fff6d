#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "engine_impl.hpp"
#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

std::string_view to_string(DeterminismMode m) noexcept {
  return m == DeterminismMode::strict ? "strict" : "fast";
}

DeterminismMode parse_determinism_mode(std::string_view s) {
  if (s == "strict") return DeterminismMode::strict;
  if (s == "fast") return DeterminismMode::fast;
  throw ValidationError("unknown determinism mode '" + std::string(s) + "'");
}

std::int64_t SimConfig::total_steps() const {
  const double span = end_s - start_s;
  if (!(span > 0)) return 0;
  return static_cast<std::int64_t>(std::ceil(span / dynamics.dt - 1e-9));
}

void SimConfig::validate() const {
  dynamics.validate();
  if (!(start_s >= 0) || !(end_s >= start_s))
    throw ValidationError("horizon must satisfy 0 <= start <= end");
  if (shards < 1) throw ValidationError("shard count must be at least 1");
  if (workers < 0) throw ValidationError("worker count must be nonnegative");
}

bool same_record(const TripRecord& a, const TripRecord& b) noexcept {
  auto eq = [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; };
  return a.trip_id == b.trip_id && eq(a.depart_s, b.depart_s) && eq(a.enter_s, b.enter_s) &&
         eq(a.arrive_s, b.arrive_s) && eq(a.travel_time_s, b.travel_time_s) &&
         eq(a.distance_m, b.distance_m) && a.complete == b.complete &&
         a.edge_entries == b.edge_entries;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

bool claim_byte(std::vector<std::uint8_t>& cells, std::size_t index, std::uint8_t byte) {
  std::atomic_ref<std::uint8_t> ref(cells[index]);
  std::uint8_t expected = kFreeCell;
  return ref.compare_exchange_strong(expected, byte, std::memory_order_acq_rel);
}

std::size_t local_index(const ShardLayout& l, const Edge& e, std::int32_t lane, std::int32_t pos) {
  return static_cast<std::size_t>(l.edge_offset[static_cast<std::size_t>(e.id)]) +
         static_cast<std::size_t>(lane) * static_cast<std::size_t>(e.cells()) +
         static_cast<std::size_t>(pos);
}

std::span<const EdgeId> route_of(const Simulation::Impl& m, std::int32_t trip_index) {
  return m.routes[static_cast<std::size_t>(trip_index)].edges;
}

// ---------------------------------------------------------------------------
// Superstep phases

void compute_phase(Simulation::Impl& m, std::int32_t s) {
  ShardState& sh = m.shards[static_cast<std::size_t>(s)];
  const double now = m.time_at(m.step);
  const double t_next = m.time_at(m.step + 1);
  const WorldView view{m.net,       LaneAccess{sh.cur, sh.layout.edge_offset},
                       m.assignment.shard_of, s, now, m.step, m.cfg.dynamics};

  const std::size_t n = sh.pool.size();
  sh.outcomes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const VehicleState& v = sh.pool[i];
    sh.outcomes[i] = step_vehicle(v, route_of(m, v.trip_index),
                                  m.trips[static_cast<std::size_t>(v.trip_index)], view);
  }

  // Departure candidates.
  sh.candidates.clear();
  if (sh.sorted_departures) {
    while (sh.cursor < sh.waiting.size() &&
           m.trips[static_cast<std::size_t>(sh.waiting[sh.cursor])].depart_s <= now)
      sh.pending.push_back(sh.waiting[sh.cursor++]);
    sh.candidates = sh.pending;
  } else {
    for (auto t : sh.waiting)
      if (m.trips[static_cast<std::size_t>(t)].depart_s <= now) sh.candidates.push_back(t);
  }
  sh.departures.clear();
  for (auto t : sh.candidates) {
    const Trip& trip = m.trips[static_cast<std::size_t>(t)];
    VehicleState w;
    w.trip_id = trip.id;
    w.trip_index = t;
    w.type = trip.type;
    sh.departures.push_back(step_vehicle(w, route_of(m, t), trip, view));
  }
  const std::size_t d = sh.departures.size();
  auto outcome = [&](std::size_t idx) -> const StepOutcome& {
    return idx < n ? sh.outcomes[idx] : sh.departures[idx - n];
  };

  // Claims against the next buffer.
  std::fill(sh.next.begin(), sh.next.end(), kFreeCell);
  std::vector<std::size_t> order;
  order.reserve(n + d);
  for (std::size_t i = 0; i < n + d; ++i)
    if (outcome(i).target) order.push_back(i);
  auto by_trip = [&](std::size_t a, std::size_t b) {
    return outcome(a).next.trip_id < outcome(b).next.trip_id;
  };
  if (m.cfg.mode == DeterminismMode::strict) {
    std::sort(order.begin(), order.end(), by_trip);
  } else {
    // Both copies of a ghost edge must settle its cells identically.
    auto mid = std::stable_partition(order.begin(), order.end(), [&](std::size_t i) {
      return m.ghost.contains(outcome(i).target->edge);
    });
    std::sort(order.begin(), mid, by_trip);
  }
  sh.lost.assign(n + d, 0);
  for (std::size_t idx : order) {
    const StepOutcome& o = outcome(idx);
    const Edge& te = m.net.edge(o.target->edge);
    const bool entering = o.kind == StepKind::depart || o.kind == StepKind::enter_edge;
    auto& flag = sh.entered[static_cast<std::size_t>(te.id)];
    bool ok = !(entering && flag);
    if (ok) ok = claim_byte(sh.next, local_index(sh.layout, te, o.target->lane, o.target->pos),
                            o.speed_byte);
    if (ok && entering) {
      flag = 1;
      sh.entered_list.push_back(te.id);
    }
    if (!ok) sh.lost[idx] = 1;
  }
  for (EdgeId e : sh.entered_list) sh.entered[static_cast<std::size_t>(e)] = 0;
  sh.entered_list.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!sh.lost[i]) continue;
    const VehicleState& fb = sh.outcomes[i].fallback;
    const Edge& e = m.net.edge(fb.cur_edge);
    if (!claim_byte(sh.next, local_index(sh.layout, e, fb.lane, fb.cell()), encode_speed(fb.speed)))
      throw InvariantViolation(m.step, "trip " + std::to_string(fb.trip_id) +
                                           " lost its own cell on shard " + std::to_string(s));
  }

  // Commit local state and record what crosses the barrier.
  sh.buffer.reset(n + d + 1);
  sh.finished.clear();
  sh.entries.clear();
  sh.departed.clear();
  sh.handoffs.clear();
  sh.held.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const StepOutcome& o = sh.outcomes[i];
    VehicleState& v = sh.pool[i];
    const auto ti = static_cast<std::size_t>(v.trip_index);
    const bool held = o.at_node && (sh.lost[i] || o.kind == StepKind::move) &&
                      m.ghost.contains(v.cur_edge);
    if (sh.lost[i]) {
      v = o.fallback;
      if (held) sh.held.push_back(v);
      continue;
    }
    switch (o.kind) {
      case StepKind::finish:
        sh.finished.push_back(
            FinishEvent{v.trip_index, FinishInfo{true, v.enter_network_time, t_next, o.next.distance_m}});
        sh.buffer.append_delete(static_cast<std::uint32_t>(i));
        sh.live[ti] = 0;
        break;
      case StepKind::handoff:
        classify_vehicle_move(o.next, o.kind, m.ghost, m.assignment, s, m.net);
        sh.handoffs.push_back(static_cast<std::uint32_t>(i));
        break;
      case StepKind::enter_edge: {
        v = o.next;
        sh.entries.push_back(EntryEvent{v.trip_index, v.cur_edge, t_next});
        const auto dec = classify_vehicle_move(v, o.kind, m.ghost, m.assignment, s, m.net);
        if (dec.action == MoveAction::replicate) sh.buffer.append_copy(v, dec.destination);
        break;
      }
      case StepKind::move:
        v = o.next;
        if (held) sh.held.push_back(v);
        break;
      default:
        throw std::logic_error("unexpected step outcome for an on-road vehicle");
    }
  }
  std::sort(sh.held.begin(), sh.held.end(),
            [](const VehicleState& a, const VehicleState& b) { return a.trip_id < b.trip_id; });
  bool admitted = false;
  for (std::size_t j = 0; j < d; ++j) {
    const StepOutcome& o = sh.departures[j];
    if (o.kind != StepKind::depart || sh.lost[n + j]) continue;
    const VehicleState& v = o.next;
    sh.departed.push_back(v);
    sh.live[static_cast<std::size_t>(v.trip_index)] = 1;
    sh.entries.push_back(EntryEvent{v.trip_index, v.cur_edge, t_next});
    const auto dec = classify_vehicle_move(v, o.kind, m.ghost, m.assignment, s, m.net);
    if (dec.action == MoveAction::replicate) sh.buffer.append_copy(v, dec.destination);
    admitted = true;
  }
  if (admitted) {
    auto gone = [&](std::int32_t t) { return sh.live[static_cast<std::size_t>(t)] != 0; };
    if (sh.sorted_departures)
      std::erase_if(sh.pending, gone);
    else
      std::erase_if(sh.waiting, gone);
  }
}

void transfer_phase(Simulation::Impl& m, std::int32_t s,
                    std::span<const TransferBuffer* const> buffers) {
  ShardState& sh = m.shards[static_cast<std::size_t>(s)];
  // A handed-off copy goes only if the node owner's copy left the edge;
  // otherwise it takes over the owner's state.
  for (auto i : sh.handoffs) {
    VehicleState& v = sh.pool[i];
    const auto& other = m.shards[static_cast<std::size_t>(m.assignment[static_cast<std::size_t>(m.net.edge(v.cur_edge).to)])].held;
    const auto it = std::lower_bound(other.begin(), other.end(), v.trip_id,
                                     [](const VehicleState& a, std::int64_t id) { return a.trip_id < id; });
    if (it != other.end() && it->trip_id == v.trip_id) {
      v = *it;
    } else {
      sh.buffer.append_delete(i);
      sh.live[static_cast<std::size_t>(v.trip_index)] = 0;
    }
  }
  apply_deletes(sh.pool, sh.buffer, m.step);
  std::sort(sh.departed.begin(), sh.departed.end(),
            [](const VehicleState& a, const VehicleState& b) { return a.trip_id < b.trip_id; });
  for (const auto& v : sh.departed) sh.pool.push(v);
  apply_incoming(sh.pool, s, buffers, sh.live, m.step);
}

void sync_phase(Simulation::Impl& m, std::int32_t s) {
  for (const auto& ge : m.ghost.edges()) {
    if (ge.owner != s) continue;
    auto& a = m.shards[static_cast<std::size_t>(ge.owner)];
    auto& b = m.shards[static_cast<std::size_t>(ge.mirror)];
    sync_ghost_edge(m.net, ge, ShardLanes{&a.layout, a.next}, ShardLanes{&b.layout, b.next}, m.step);
  }
}

TripRecord make_record(const Simulation::Impl& m, std::size_t ti, const VehicleState* live) {
  const Trip& t = m.trips[ti];
  TripRecord r;
  r.trip_id = t.id;
  r.depart_s = t.depart_s;
  const FinishInfo& f = m.finish[ti];
  if (f.done) {
    r.enter_s = f.enter_s;
    r.arrive_s = f.arrive_s;
    r.travel_time_s = f.arrive_s - f.enter_s;
    r.distance_m = f.distance_m;
    r.complete = true;
  } else if (live) {
    r.enter_s = live->enter_network_time;
    r.distance_m = live->distance_m;
  }
  r.edge_entries = m.entry_log[ti];
  return r;
}

std::unordered_map<std::int32_t, const VehicleState*> unique_live(const Simulation::Impl& m) {
  std::unordered_map<std::int32_t, const VehicleState*> out;
  for (const auto& sh : m.shards)
    for (const auto& v : sh.pool.items()) out.try_emplace(v.trip_index, &v);
  return out;
}

void finish_step(Simulation::Impl& m, std::ostream* sink, const double phase_ms[3]) {
  std::vector<FinishEvent> done;
  std::int64_t copies = 0, deletes = 0;
  for (auto& sh : m.shards) {
    done.insert(done.end(), sh.finished.begin(), sh.finished.end());
    copies += static_cast<std::int64_t>(sh.buffer.copy_count());
    deletes += static_cast<std::int64_t>(sh.buffer.delete_count());
    for (const auto& e : sh.entries)
      m.entry_log[static_cast<std::size_t>(e.trip_index)].emplace_back(e.edge, e.time_s);
    std::swap(sh.cur, sh.next);
  }
  std::sort(done.begin(), done.end(), [&](const FinishEvent& a, const FinishEvent& b) {
    return m.trips[static_cast<std::size_t>(a.trip_index)].id <
           m.trips[static_cast<std::size_t>(b.trip_index)].id;
  });
  for (const auto& f : done) {
    auto& slot = m.finish[static_cast<std::size_t>(f.trip_index)];
    if (slot.done)
      throw InvariantViolation(m.step, "trip " +
                                           std::to_string(m.trips[static_cast<std::size_t>(f.trip_index)].id) +
                                           " finished twice");
    slot = f.info;
    ++m.finished_count;
    if (sink) write_record(*sink, make_record(m, static_cast<std::size_t>(f.trip_index), nullptr));
  }

  StepMetrics sm;
  sm.step = m.step;
  sm.time_s = m.time_at(m.step);
  for (const auto& sh : m.shards) sm.waiting += static_cast<std::int64_t>(sh.waiting_count());
  sm.live = static_cast<std::int64_t>(unique_live(m).size());
  sm.finished = m.finished_count;
  sm.copies = copies;
  sm.deletes = deletes;
  sm.compute_ms = phase_ms[0];
  sm.transfer_ms = phase_ms[1];
  sm.sync_ms = phase_ms[2];
  auto& rm = m.metrics;
  rm.steps.push_back(sm);
  rm.compute_ms += sm.compute_ms;
  rm.transfer_ms += sm.transfer_ms;
  rm.sync_ms += sm.sync_ms;
  rm.copies += copies;
  rm.deletes += deletes;
  rm.max_live = std::max(rm.max_live, sm.live);

  ++m.step;

  if (m.cfg.ghost_checksum_log) {
    std::vector<ShardLanes> lanes;
    for (auto& sh : m.shards) lanes.push_back(ShardLanes{&sh.layout, sh.cur});
    for (const auto& c : ghost_checksums(m.net, m.ghost, lanes))
      *m.cfg.ghost_checksum_log << "step " << m.step << " edge " << m.net.edge(c.edge).external_id
                                << ' ' << std::hex << c.owner << ' ' << c.mirror << std::dec
                                << (c.owner == c.mirror ? "" : " DIVERGED") << '\n';
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Simulation::Simulation(const RoadNetwork& net, std::vector<Trip> trips, std::vector<Route> routes,
                       PartitionAssignment assignment, SimConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  if (trips.size() != routes.size()) throw ValidationError("trip and route tables differ in length");
  if (trips.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw ValidationError("too many trips");
  for (std::size_t i = 0; i < trips.size(); ++i) validate_route(net, trips[i], routes[i]);
  {
    std::vector<std::int64_t> ids;
    ids.reserve(trips.size());
    for (const auto& t : trips) ids.push_back(t.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw ValidationError("trip ids must be unique");
  }
  if (assignment.shard_of.size() != net.node_count())
    throw ValidationError("partition does not match the network");
  if (assignment.shards != cfg.shards)
    throw ValidationError("partition has " + std::to_string(assignment.shards) +
                          " shards, configuration asks for " + std::to_string(cfg.shards));
  assignment.validate();

  Impl& m = *impl_;
  m.net = net;
  m.trips = std::move(trips);
  m.routes = std::move(routes);
  m.assignment = std::move(assignment);
  m.cfg = cfg;
  m.ghost = identify_ghost_edges(m.assignment, m.net);

  double v_max = 0.0;
  for (const auto& e : m.net.edges()) v_max = std::max(v_max, e.free_flow_speed);
  double shortest = std::numeric_limits<double>::infinity();
  for (const auto& e : m.net.edges())
    if (m.cfg.mode == DeterminismMode::strict || m.ghost.contains(e.id))
      shortest = std::min(shortest, e.length_m);
  if (v_max * m.cfg.dt() > shortest)
    throw ValidationError("dt too large: a vehicle at " + text::format_double(v_max) +
                          " m/s could cross a " + text::format_double(shortest) + " m edge in one step");

  m.global_offset.resize(m.net.edge_count());
  for (const auto& e : m.net.edges()) {
    m.global_offset[static_cast<std::size_t>(e.id)] = m.global_bytes;
    m.global_bytes += e.footprint();
  }

  m.shards.resize(static_cast<std::size_t>(m.cfg.shards));
  for (std::int32_t s = 0; s < m.cfg.shards; ++s) {
    auto& sh = m.shards[static_cast<std::size_t>(s)];
    sh.layout = make_shard_layout(m.net, m.assignment, s);
    sh.cur.assign(sh.layout.bytes, kFreeCell);
    sh.next.assign(sh.layout.bytes, kFreeCell);
    sh.live.assign(m.trips.size(), 0);
    sh.entered.assign(m.net.edge_count(), 0);
  }
  for (std::size_t i = 0; i < m.trips.size(); ++i) {
    const NodeId origin = m.net.edge(m.routes[i].edges.front()).from;
    m.shards[static_cast<std::size_t>(m.assignment[static_cast<std::size_t>(origin)])]
        .waiting.push_back(static_cast<std::int32_t>(i));
  }
  for (auto& sh : m.shards)
    sh.sorted_departures = std::is_sorted(sh.waiting.begin(), sh.waiting.end(), [&](auto a, auto b) {
      return m.trips[static_cast<std::size_t>(a)].depart_s < m.trips[static_cast<std::size_t>(b)].depart_s;
    });
  m.finish.resize(m.trips.size());
  m.entry_log.resize(m.trips.size());
  m.total_steps = m.cfg.total_steps();
  m.metrics.ghost_edges = static_cast<std::int64_t>(m.ghost.size());
}

Simulation::~Simulation() = default;

std::int64_t Simulation::step() const noexcept { return impl_->step; }
double Simulation::now() const noexcept { return impl_->time_at(impl_->step); }
const RunMetrics& Simulation::metrics() const noexcept { return impl_->metrics; }
const GhostZone& Simulation::ghost_zone() const noexcept { return impl_->ghost; }

bool Simulation::done() const noexcept {
  const Impl& m = *impl_;
  if (m.step >= m.total_steps) return true;
  return m.cfg.stop_when_done && m.finished_count == static_cast<std::int64_t>(m.trips.size());
}

void Simulation::advance(std::int64_t steps, std::ostream* sink) {
  Impl& m = *impl_;
  const std::int64_t target = std::min(m.total_steps, m.step + std::max<std::int64_t>(steps, 0));
  if (m.step >= target || done()) return;

  const std::int32_t k = m.cfg.shards;
  const std::int32_t workers = std::clamp(m.cfg.workers > 0 ? m.cfg.workers : k, 1, k);

  std::vector<const TransferBuffer*> buffers;
  for (const auto& sh : m.shards) buffers.push_back(&sh.buffer);

  std::mutex error_mu;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto fail = [&](std::exception_ptr e) {
    std::lock_guard lock(error_mu);
    if (!error) error = e;
    failed.store(true);
  };

  bool stop = false;
  int phase = 0;
  double phase_ms[3] = {0, 0, 0};
  Clock::time_point mark = Clock::now();
  const Clock::time_point wall0 = mark;
  auto completion = [&]() noexcept {
    const auto t = Clock::now();
    phase_ms[phase] = elapsed_ms(mark, t);
    if (phase == 2) {
      if (!failed.load()) {
        try {
          finish_step(m, sink, phase_ms);
          if (m.cfg.check_invariants) check_invariants();
        } catch (...) {
          fail(std::current_exception());
        }
      }
      stop = failed.load() || m.step >= target || done();
    }
    phase = (phase + 1) % 3;
    mark = Clock::now();
  };
  std::barrier sync(workers, completion);

  auto each_shard = [&](std::int32_t w, auto&& body) {
    if (failed.load()) return;
    for (std::int32_t s = w; s < k; s += workers) {
      try {
        body(s);
      } catch (...) {
        fail(std::current_exception());
        return;
      }
    }
  };
  auto worker = [&](std::int32_t w) {
    while (true) {
      each_shard(w, [&](std::int32_t s) { compute_phase(m, s); });
      sync.arrive_and_wait();
      each_shard(w, [&](std::int32_t s) { transfer_phase(m, s, buffers); });
      sync.arrive_and_wait();
      each_shard(w, [&](std::int32_t s) { sync_phase(m, s); });
      sync.arrive_and_wait();
      if (stop) break;
    }
  };
  {
    std::vector<std::jthread> threads;
    for (std::int32_t w = 1; w < workers; ++w) threads.emplace_back(worker, w);
    worker(0);
  }
  m.metrics.wall_ms += elapsed_ms(wall0, Clock::now());
  if (error) std::rethrow_exception(error);
}

void Simulation::run(std::ostream* sink) {
  advance(impl_->total_steps - impl_->step, sink);
  if (!sink) return;
  const auto live = unique_live(*impl_);
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < impl_->trips.size(); ++i)
    if (!impl_->finish[i].done) open.push_back(i);
  std::sort(open.begin(), open.end(),
            [&](auto a, auto b) { return impl_->trips[a].id < impl_->trips[b].id; });
  for (auto i : open) {
    auto it = live.find(static_cast<std::int32_t>(i));
    write_record(*sink, make_record(*impl_, i, it == live.end() ? nullptr : it->second));
  }
}

std::vector<TripRecord> Simulation::records() const {
  const Impl& m = *impl_;
  const auto live = unique_live(m);
  std::vector<TripRecord> out;
  out.reserve(m.trips.size());
  for (std::size_t i = 0; i < m.trips.size(); ++i) {
    auto it = live.find(static_cast<std::int32_t>(i));
    out.push_back(make_record(m, i, it == live.end() ? nullptr : it->second));
  }
  std::sort(out.begin(), out.end(),
            [](const TripRecord& a, const TripRecord& b) { return a.trip_id < b.trip_id; });
  return out;
}

std::vector<TripRecord> Simulation::completed_records() const {
  auto all = records();
  std::erase_if(all, [](const TripRecord& r) { return !r.complete; });
  return all;
}

PopulationCounts Simulation::counts() const {
  const Impl& m = *impl_;
  PopulationCounts c;
  c.total = static_cast<std::int64_t>(m.trips.size());
  for (const auto& sh : m.shards) c.waiting += static_cast<std::int64_t>(sh.waiting_count());
  c.live = static_cast<std::int64_t>(unique_live(m).size());
  c.finished = m.finished_count;
  return c;
}

LaneMap Simulation::global_lane_map() const {
  const Impl& m = *impl_;
  LaneMap map(m.global_bytes);
  auto bytes = map.bytes();
  for (const auto& e : m.net.edges()) {
    const auto& sh = m.shards[static_cast<std::size_t>(m.assignment[static_cast<std::size_t>(e.from)])];
    const auto off = static_cast<std::size_t>(sh.layout.edge_offset[static_cast<std::size_t>(e.id)]);
    std::copy_n(sh.cur.begin() + static_cast<std::ptrdiff_t>(off), e.footprint(),
                bytes.begin() + static_cast<std::ptrdiff_t>(m.global_offset[static_cast<std::size_t>(e.id)]));
  }
  return map;
}

std::vector<VehicleState> Simulation::live_vehicles() const {
  std::vector<VehicleState> out;
  for (const auto& [ti, v] : unique_live(*impl_)) out.push_back(*v);
  std::sort(out.begin(), out.end(),
            [](const VehicleState& a, const VehicleState& b) { return a.trip_id < b.trip_id; });
  return out;
}

void Simulation::check_invariants() const {
  const Impl& m = *impl_;
  const auto step = m.step;
  auto fail = [&](const std::string& what) { throw InvariantViolation(step, what); };

  for (const auto& ge : m.ghost.edges()) {
    const Edge& e = m.net.edge(ge.edge);
    const auto& a = m.shards[static_cast<std::size_t>(ge.owner)];
    const auto& b = m.shards[static_cast<std::size_t>(ge.mirror)];
    if (!std::equal(a.cur.begin() + a.layout.edge_offset[static_cast<std::size_t>(e.id)],
                    a.cur.begin() + a.layout.edge_offset[static_cast<std::size_t>(e.id)] +
                        static_cast<std::ptrdiff_t>(e.footprint()),
                    b.cur.begin() + b.layout.edge_offset[static_cast<std::size_t>(e.id)]))
      fail("ghost edge " + std::to_string(e.external_id) + " differs between shards " +
           std::to_string(ge.owner) + " and " + std::to_string(ge.mirror));
  }

  std::unordered_map<std::int32_t, const VehicleState*> seen;
  std::unordered_map<std::int32_t, int> copies;
  for (std::size_t s = 0; s < m.shards.size(); ++s) {
    const auto& sh = m.shards[s];
    for (const auto& v : sh.pool.items()) {
      if (!v.on_road()) fail("pool holds trip " + std::to_string(v.trip_id) + " off the road");
      if (!sh.layout.holds(v.cur_edge))
        fail("trip " + std::to_string(v.trip_id) + " sits on an edge shard " + std::to_string(s) +
             " does not hold");
      ++copies[v.trip_index];
      auto [it, fresh] = seen.try_emplace(v.trip_index, &v);
      if (!fresh) {
        if (!m.ghost.contains(v.cur_edge))
          fail("trip " + std::to_string(v.trip_id) + " live on two shards off the ghost zone");
        if (!same_state(*it->second, v))
          fail("ghost copies of trip " + std::to_string(v.trip_id) + " diverged");
      }
    }
  }

  for (const auto& [ti, v] : seen)
    if (m.ghost.contains(v->cur_edge) && copies[ti] != 2)
      fail("trip " + std::to_string(v->trip_id) + " on ghost edge " +
           std::to_string(m.net.edge(v->cur_edge).external_id) + " is missing a copy");

  const LaneMap map = global_lane_map();
  std::vector<std::uint8_t> taken(map.size(), 0);
  for (const auto& [ti, v] : seen) {
    const Edge& e = m.net.edge(v->cur_edge);
    const std::size_t idx = m.global_offset[static_cast<std::size_t>(e.id)] +
                            static_cast<std::size_t>(v->lane) * static_cast<std::size_t>(e.cells()) +
                            static_cast<std::size_t>(v->cell());
    if (taken[idx]) fail("two vehicles occupy one cell on edge " + std::to_string(e.external_id));
    taken[idx] = 1;
    if (map[idx] != encode_speed(v->speed))
      fail("cell of trip " + std::to_string(v->trip_id) + " holds " + std::to_string(map[idx]) +
           ", expected " + std::to_string(encode_speed(v->speed)));
  }
  const auto occupied = static_cast<std::int64_t>(map.occupied_count());
  if (occupied != static_cast<std::int64_t>(seen.size()))
    fail(std::to_string(occupied) + " occupied cells for " + std::to_string(seen.size()) +
         " vehicles on the road");

  const auto c = counts();
  if (c.waiting + c.live + c.finished != c.total)
    fail("conservation broken: " + std::to_string(c.waiting) + " waiting + " +
         std::to_string(c.live) + " live + " + std::to_string(c.finished) + " finished != " +
         std::to_string(c.total));
}

// ---------------------------------------------------------------------------
// Files

void write_results_header(std::ostream& out) {
  out << "id,depart,enter,arrive,travel_time,distance\n";
}

void write_record(std::ostream& out, const TripRecord& r) {
  auto field = [](double v) { return std::isnan(v) ? std::string() : text::format_double(v); };
  out << r.trip_id << ',' << field(r.depart_s) << ',' << field(r.enter_s) << ','
      << field(r.arrive_s) << ',' << field(r.travel_time_s) << ','
      << (r.complete ? field(r.distance_m) : std::string()) << '\n';
}

void write_results(const std::filesystem::path& path, const std::vector<TripRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write results file " + path.string());
  write_results_header(out);
  for (const auto& r : records) write_record(out, r);
}

void write_metrics(const std::filesystem::path& path, const RunMetrics& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write metrics file " + path.string());
  out << "step,time_s,waiting,live,finished,copies,deletes,compute_ms,transfer_ms,sync_ms\n";
  for (const auto& s : m.steps) {
    out << s.step << ',' << text::format_double(s.time_s) << ',' << s.waiting << ',' << s.live
        << ',' << s.finished << ',' << s.copies << ',' << s.deletes << ','
        << text::format_double(s.compute_ms) << ',' << text::format_double(s.transfer_ms) << ','
        << text::format_double(s.sync_ms) << '\n';
  }
}

RunOutput run(const SimConfig& cfg, const RoadNetwork& net, const std::vector<Trip>& trips,
              const std::vector<Route>& routes, const PartitionAssignment& assignment) {
  Simulation sim(net, trips, routes, assignment, cfg);
  sim.run();
  return RunOutput{sim.records(), sim.metrics()};
}

}  // namespace lanesim
