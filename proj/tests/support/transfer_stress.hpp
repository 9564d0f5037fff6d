#pragma once

// Randomized copy/delete workload for the transfer protocol, shared by the
// unit tests and the acceptance run.

#include <algorithm>
#include <random>
#include <thread>
#include <vector>

#include "lanesim/shard_runtime.hpp"

namespace stress {

struct Op {
  std::int32_t source = 0;
  bool is_copy = false;
  std::uint32_t position = 0;       // delete: index into the source pool
  lanesim::VehicleState vehicle;    // copy payload
  std::int32_t destination = 0;
};

struct Workload {
  std::vector<std::vector<lanesim::VehicleState>> pools;
  std::vector<Op> ops;
};

inline lanesim::VehicleState vehicle(std::int64_t id) {
  lanesim::VehicleState v;
  v.trip_id = id;
  v.trip_index = static_cast<std::int32_t>(id);
  v.offset_m = static_cast<double>(id % 97);
  v.phase = lanesim::Phase::on_road;
  return v;
}

/// `op_count` operations over `shards` pools. Deletes name distinct
/// positions; copies carry trips not already live at their destination.
inline Workload make_workload(std::uint64_t seed, int shards, int op_count) {
  std::mt19937_64 rng(seed);
  Workload w;
  w.pools.resize(static_cast<std::size_t>(shards));
  std::int64_t next_id = 0;
  for (auto& p : w.pools) {
    const int n = 150 + static_cast<int>(rng() % 150);
    for (int i = 0; i < n; ++i) p.push_back(vehicle(next_id++));
  }
  std::vector<std::vector<std::uint32_t>> free_pos(static_cast<std::size_t>(shards));
  for (int s = 0; s < shards; ++s) {
    for (std::uint32_t i = 0; i < w.pools[static_cast<std::size_t>(s)].size(); ++i) free_pos[static_cast<std::size_t>(s)].push_back(i);
    std::shuffle(free_pos[static_cast<std::size_t>(s)].begin(), free_pos[static_cast<std::size_t>(s)].end(), rng);
  }
  for (int k = 0; k < op_count; ++k) {
    Op op;
    op.source = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(shards));
    auto& fp = free_pos[static_cast<std::size_t>(op.source)];
    op.is_copy = fp.empty() || rng() % 2 == 0;
    if (op.is_copy) {
      op.vehicle = vehicle(next_id++);
      op.destination = static_cast<std::int32_t>((op.source + 1 + static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(shards - 1))) % shards);
    } else {
      op.position = fp.back();
      fp.pop_back();
    }
    w.ops.push_back(op);
  }
  return w;
}

/// Appends the ops from `threads` concurrent writers, then applies them.
inline std::vector<lanesim::VehiclePool> run_concurrent(const Workload& w, int threads,
                                                        std::uint64_t seed) {
  const auto shards = w.pools.size();
  std::vector<lanesim::VehiclePool> pools(shards);
  std::vector<lanesim::TransferBuffer> buffers(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    for (const auto& v : w.pools[s]) pools[s].push(v);
    buffers[s].reset(w.ops.size());
  }
  std::vector<std::size_t> order(w.ops.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < order.size(); i += static_cast<std::size_t>(threads)) {
        const Op& op = w.ops[order[i]];
        auto& b = buffers[static_cast<std::size_t>(op.source)];
        if (op.is_copy) b.append_copy(op.vehicle, op.destination);
        else b.append_delete(op.position);
        if (i % 7 == 0) std::this_thread::yield();
      }
    });
  }
  for (auto& th : pool) th.join();
  std::vector<const lanesim::TransferBuffer*> ptrs;
  for (auto& b : buffers) ptrs.push_back(&b);
  lanesim::apply_transfers(pools, ptrs, 0);
  return pools;
}

/// One op at a time: drop deleted trips, then add copied ones.
inline std::vector<std::vector<std::int64_t>> replay(const Workload& w) {
  std::vector<std::vector<std::int64_t>> out(w.pools.size());
  std::vector<std::vector<char>> dead(w.pools.size());
  for (std::size_t s = 0; s < w.pools.size(); ++s) dead[s].assign(w.pools[s].size(), 0);
  for (const auto& op : w.ops)
    if (!op.is_copy) dead[static_cast<std::size_t>(op.source)][op.position] = 1;
  for (std::size_t s = 0; s < w.pools.size(); ++s)
    for (std::size_t i = 0; i < w.pools[s].size(); ++i)
      if (!dead[s][i]) out[s].push_back(w.pools[s][i].trip_id);
  for (const auto& op : w.ops)
    if (op.is_copy) out[static_cast<std::size_t>(op.destination)].push_back(op.vehicle.trip_id);
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

inline std::vector<std::int64_t> ids(const lanesim::VehiclePool& p) {
  std::vector<std::int64_t> v;
  for (const auto& x : p.items()) v.push_back(x.trip_id);
  return v;
}

}  // namespace stress
