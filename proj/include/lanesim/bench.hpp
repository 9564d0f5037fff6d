#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lanesim/engine.hpp"

namespace lanesim {

struct BenchRun {
  std::int32_t k = 1;
  PartitionMethod method = PartitionMethod::balanced;
  std::size_t demand = 0;
  int repetition = 0;
  double wall_ms = 0.0;
  double compute_ms = 0.0;
  double transfer_ms = 0.0;
  double sync_ms = 0.0;
  double speedup = 0.0;  // median wall at K=1 over median wall at this K; NaN without a K=1 run
};

struct BenchReport {
  std::vector<BenchRun> runs;  // K-major, then method, then repetition
  std::vector<std::string> notes;  // regressions and transfer-ratio flags
  bool gate_checked = false;

  /// Median wall time over the repetitions of one configuration.
  double median_wall_ms(std::int32_t k, PartitionMethod method) const;
  double median_transfer_ratio(std::int32_t k, PartitionMethod method) const;
};

struct BenchOptions {
  std::vector<std::int32_t> ks{1, 2, 4};
  std::vector<PartitionMethod> methods{PartitionMethod::balanced};
  int repetitions = 3;
  bool verify_strict = true;   // cross-K equality gate before timing
  std::int32_t workers = 0;    // threads per run; 0 = one per shard
  PartitionOptions partition{};
};

/// Runs the same scenario at each (K, method) in fast mode and reports the
/// median of the repetitions. Throws InvariantViolation when strict-mode
/// results differ between shard counts.
BenchReport bench_strong_scaling(const RoadNetwork& net, const std::vector<Trip>& trips,
                                 const std::vector<Route>& routes, const SimConfig& base,
                                 const BenchOptions& options);

/// Header `k,method,demand,wall_ms,compute_ms,transfer_ms,sync_ms,speedup`,
/// one row per run.
void emit_plot_data(const BenchReport& report, std::ostream& out);
void emit_plot_data(const BenchReport& report, const std::filesystem::path& path);

}  // namespace lanesim
