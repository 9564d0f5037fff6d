// Binary checkpoint: "LSCK", u32 version, u64 payload length, u64 FNV-1a of
// the payload, payload. Little-endian fixed-width fields throughout.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

#include "engine_impl.hpp"
#include "lanesim/error.hpp"

namespace lanesim {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little-endian");

constexpr char kMagic[4] = {'L', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(std::span<const std::uint8_t> b) {
    put<std::uint64_t>(b.size());
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  void ints(const std::vector<std::int32_t>& v) {
    put<std::uint64_t>(v.size());
    for (auto x : v) put(x);
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const char> data) : data_(data) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw ValidationError("checkpoint payload truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::uint64_t count(std::uint64_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw ValidationError("checkpoint count out of range");
    return n;
  }
  std::vector<std::uint8_t> bytes(std::uint64_t limit) {
    const auto n = count(limit);
    if (pos_ + n > data_.size()) throw ValidationError("checkpoint payload truncated");
    std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  std::vector<std::int32_t> ints(std::uint64_t limit) {
    std::vector<std::int32_t> v(count(limit));
    for (auto& x : v) x = get<std::int32_t>();
    return v;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

void put_vehicle(Writer& w, const VehicleState& v) {
  w.put(v.trip_id);
  w.put(v.trip_index);
  w.put(v.route_pos);
  w.put(v.prev_edge);
  w.put(v.cur_edge);
  w.put(v.next_edge);
  w.put(v.lane);
  w.put(v.offset_m);
  w.put(v.speed);
  w.put(v.accel);
  w.put(v.edge_entry_time);
  w.put(v.enter_network_time);
  w.put(v.distance_m);
  w.put(static_cast<std::uint8_t>(v.phase));
  w.put(static_cast<std::uint8_t>(v.type));
}

VehicleState get_vehicle(Reader& r) {
  VehicleState v;
  v.trip_id = r.get<std::int64_t>();
  v.trip_index = r.get<std::int32_t>();
  v.route_pos = r.get<std::int32_t>();
  v.prev_edge = r.get<EdgeId>();
  v.cur_edge = r.get<EdgeId>();
  v.next_edge = r.get<EdgeId>();
  v.lane = r.get<std::int32_t>();
  v.offset_m = r.get<double>();
  v.speed = r.get<double>();
  v.accel = r.get<double>();
  v.edge_entry_time = r.get<double>();
  v.enter_network_time = r.get<double>();
  v.distance_m = r.get<double>();
  const auto phase = r.get<std::uint8_t>();
  const auto type = r.get<std::uint8_t>();
  if (phase > static_cast<std::uint8_t>(Phase::marked_for_removal) ||
      type > static_cast<std::uint8_t>(VehicleType::truck))
    throw ValidationError("checkpoint holds an invalid vehicle record");
  v.phase = static_cast<Phase>(phase);
  v.type = static_cast<VehicleType>(type);
  return v;
}

std::uint64_t fnv_bytes(const char* p, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<std::uint8_t>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t mix(std::uint64_t h, T v) {
  return fnv_bytes(reinterpret_cast<const char*>(&v), sizeof v, h);
}

}  // namespace

std::uint64_t Simulation::Impl::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = mix(h, net.node_count());
  for (const auto& e : net.edges()) {
    h = mix(h, e.external_id);
    h = mix(h, e.length_m);
    h = mix(h, e.lanes);
  }
  for (std::size_t i = 0; i < trips.size(); ++i) {
    h = mix(h, trips[i].id);
    h = mix(h, trips[i].depart_s);
    for (EdgeId e : routes[i].edges) h = mix(h, e);
  }
  for (auto s : assignment.shard_of) h = mix(h, s);
  h = mix(h, cfg.shards);
  h = mix(h, cfg.dynamics.dt);
  h = mix(h, cfg.dynamics.seed);
  h = mix(h, cfg.start_s);
  h = mix(h, cfg.end_s);
  h = mix(h, static_cast<std::uint8_t>(cfg.mode));
  return h;
}

void Simulation::save_checkpoint(const std::filesystem::path& path) const {
  const Impl& m = *impl_;
  Writer w;
  w.put(m.fingerprint());
  w.put(m.step);
  w.put(m.finished_count);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.shards.size()));
  for (const auto& sh : m.shards) {
    w.put<std::uint64_t>(sh.pool.size());
    for (const auto& v : sh.pool.items()) put_vehicle(w, v);
    std::vector<std::int32_t> rest(sh.waiting.begin() + static_cast<std::ptrdiff_t>(sh.cursor),
                                   sh.waiting.end());
    w.ints(sh.pending);
    w.ints(rest);
    w.bytes(sh.cur);
  }
  for (std::size_t i = 0; i < m.trips.size(); ++i) {
    const auto& f = m.finish[i];
    w.put<std::uint8_t>(f.done ? 1 : 0);
    w.put(f.enter_s);
    w.put(f.arrive_s);
    w.put(f.distance_m);
    w.put<std::uint64_t>(m.entry_log[i].size());
    for (const auto& [e, t] : m.entry_log[i]) {
      w.put(e);
      w.put(t);
    }
  }

  const auto& payload = w.data();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kVersion;
  const std::uint64_t length = payload.size();
  const std::uint64_t checksum = fnv_bytes(payload.data(), payload.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ValidationError("failed writing checkpoint " + path.string());
}

void Simulation::restore_checkpoint(const std::filesystem::path& path) {
  Impl& m = *impl_;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::vector<char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = sizeof kMagic + 4 + 8 + 8;
  if (file.size() < header) throw ValidationError("checkpoint truncated");
  if (std::memcmp(file.data(), kMagic, sizeof kMagic) != 0)
    throw ValidationError("not a checkpoint file");
  std::uint32_t version;
  std::uint64_t length, checksum;
  std::memcpy(&version, file.data() + 4, 4);
  std::memcpy(&length, file.data() + 8, 8);
  std::memcpy(&checksum, file.data() + 16, 8);
  if (version != kVersion)
    throw ValidationError("checkpoint version " + std::to_string(version) + " not supported");
  if (file.size() - header != length) throw ValidationError("checkpoint truncated");
  if (fnv_bytes(file.data() + header, length) != checksum)
    throw ValidationError("checkpoint checksum mismatch");

  Reader r(std::span<const char>(file.data() + header, length));
  if (r.get<std::uint64_t>() != m.fingerprint())
    throw ValidationError("checkpoint belongs to different inputs or configuration");
  const auto step = r.get<std::int64_t>();
  const auto finished_count = r.get<std::int64_t>();
  if (step < 0 || step > m.total_steps) throw ValidationError("checkpoint step out of range");
  if (r.get<std::uint32_t>() != m.shards.size()) throw ValidationError("checkpoint shard count differs");

  const std::uint64_t trips = m.trips.size();
  struct Staged {
    std::vector<VehicleState> pool;
    std::vector<std::int32_t> pending, waiting;
    std::vector<std::uint8_t> cur;
  };
  std::vector<Staged> staged(m.shards.size());
  for (std::size_t s = 0; s < m.shards.size(); ++s) {
    auto& st = staged[s];
    const auto n = r.count(trips);
    for (std::uint64_t i = 0; i < n; ++i) {
      st.pool.push_back(get_vehicle(r));
      const auto& v = st.pool.back();
      if (v.trip_index < 0 || static_cast<std::uint64_t>(v.trip_index) >= trips ||
          !m.shards[s].layout.holds(v.cur_edge))
        throw ValidationError("checkpoint vehicle does not fit this simulation");
    }
    st.pending = r.ints(trips);
    st.waiting = r.ints(trips);
    for (auto t : st.pending)
      if (t < 0 || static_cast<std::uint64_t>(t) >= trips) throw ValidationError("bad trip index");
    for (auto t : st.waiting)
      if (t < 0 || static_cast<std::uint64_t>(t) >= trips) throw ValidationError("bad trip index");
    st.cur = r.bytes(m.shards[s].layout.bytes);
    if (st.cur.size() != m.shards[s].layout.bytes) throw ValidationError("checkpoint lane slice size");
  }
  std::vector<FinishInfo> finish(trips);
  std::vector<std::vector<std::pair<EdgeId, double>>> entries(trips);
  for (std::uint64_t i = 0; i < trips; ++i) {
    finish[i].done = r.get<std::uint8_t>() != 0;
    finish[i].enter_s = r.get<double>();
    finish[i].arrive_s = r.get<double>();
    finish[i].distance_m = r.get<double>();
    const auto n = r.count(m.net.edge_count() * 4 + 16);
    for (std::uint64_t j = 0; j < n; ++j) {
      const auto e = r.get<EdgeId>();
      const auto t = r.get<double>();
      entries[i].emplace_back(e, t);
    }
  }
  if (!r.at_end()) throw ValidationError("checkpoint has trailing data");

  // Everything parsed; commit.
  m.step = step;
  m.finished_count = finished_count;
  m.finish = std::move(finish);
  m.entry_log = std::move(entries);
  for (std::size_t s = 0; s < m.shards.size(); ++s) {
    auto& sh = m.shards[s];
    auto& st = staged[s];
    sh.pool.clear();
    std::fill(sh.live.begin(), sh.live.end(), 0);
    for (const auto& v : st.pool) {
      sh.pool.push(v);
      sh.live[static_cast<std::size_t>(v.trip_index)] = 1;
    }
    sh.pending = std::move(st.pending);
    sh.waiting = std::move(st.waiting);
    sh.cursor = 0;
    sh.cur = std::move(st.cur);
    std::fill(sh.next.begin(), sh.next.end(), kFreeCell);
  }
}

}  // namespace lanesim
