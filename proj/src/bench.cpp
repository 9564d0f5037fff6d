#include "lanesim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double BenchReport::median_wall_ms(std::int32_t k, PartitionMethod method) const {
  std::vector<double> w;
  for (const auto& r : runs)
    if (r.k == k && r.method == method) w.push_back(r.wall_ms);
  return median(std::move(w));
}

double BenchReport::median_transfer_ratio(std::int32_t k, PartitionMethod method) const {
  std::vector<double> w;
  for (const auto& r : runs)
    if (r.k == k && r.method == method && r.compute_ms > 0) w.push_back(r.transfer_ms / r.compute_ms);
  return median(std::move(w));
}

BenchReport bench_strong_scaling(const RoadNetwork& net, const std::vector<Trip>& trips,
                                 const std::vector<Route>& routes, const SimConfig& base,
                                 const BenchOptions& options) {
  if (options.ks.empty() || options.methods.empty())
    throw ValidationError("benchmark needs at least one shard count and one method");
  if (options.repetitions < 1) throw ValidationError("benchmark needs at least one repetition");

  const TrafficGraph graph = build_traffic_graph(net, trips, routes, base.start_s, base.end_s);
  std::map<std::pair<std::int32_t, PartitionMethod>, PartitionAssignment> parts;
  for (auto k : options.ks)
    for (auto m : options.methods)
      parts[{k, m}] = partition_graph(graph, m, k, options.partition);

  BenchReport report;
  if (options.verify_strict) {
    SimConfig cfg = base;
    cfg.mode = DeterminismMode::strict;
    cfg.check_invariants = false;
    cfg.shards = 1;
    cfg.workers = options.workers;
    const auto reference =
        run(cfg, net, trips, routes, PartitionAssignment::single(net.node_count())).records;
    for (const auto& [key, assignment] : parts) {
      if (key.first == 1) continue;
      cfg.shards = key.first;
      const auto got = run(cfg, net, trips, routes, assignment).records;
      const bool same = got.size() == reference.size() &&
                        std::equal(got.begin(), got.end(), reference.begin(), same_record);
      if (!same)
        throw InvariantViolation(0, "strict-mode results at K=" + std::to_string(key.first) + " (" +
                                        std::string(to_string(key.second)) +
                                        ") differ from K=1; benchmark aborted");
    }
    report.gate_checked = true;
  }

  for (auto k : options.ks) {
    for (auto m : options.methods) {
      SimConfig cfg = base;
      cfg.mode = DeterminismMode::fast;
      cfg.check_invariants = false;
      cfg.shards = k;
      cfg.workers = options.workers;
      for (int rep = 0; rep < options.repetitions; ++rep) {
        Simulation sim(net, trips, routes, parts.at({k, m}), cfg);
        sim.run();
        const auto& mt = sim.metrics();
        report.runs.push_back(BenchRun{k, m, trips.size(), rep, mt.wall_ms, mt.compute_ms,
                                       mt.transfer_ms, mt.sync_ms, 0.0});
      }
    }
  }

  const bool has_base = std::find(options.ks.begin(), options.ks.end(), 1) != options.ks.end();
  for (auto& r : report.runs) {
    r.speedup = has_base ? report.median_wall_ms(1, r.method) / report.median_wall_ms(r.k, r.method)
                         : std::numeric_limits<double>::quiet_NaN();
  }
  for (auto m : options.methods) {
    for (std::size_t i = 0; i < options.ks.size(); ++i) {
      const auto k = options.ks[i];
      const double ratio = report.median_transfer_ratio(k, m);
      if (ratio > 0.1)
        report.notes.push_back("K=" + std::to_string(k) + " " + std::string(to_string(m)) +
                               ": transfer/compute ratio " + text::format_double(std::round(ratio * 1000) / 1000) +
                               " exceeds 10%");
      if (i > 0 && report.median_wall_ms(k, m) > report.median_wall_ms(options.ks[i - 1], m))
        report.notes.push_back("K=" + std::to_string(k) + " " + std::string(to_string(m)) +
                               ": wall time regressed versus K=" + std::to_string(options.ks[i - 1]));
    }
  }
  return report;
}

void emit_plot_data(const BenchReport& report, std::ostream& out) {
  out << "k,method,demand,wall_ms,compute_ms,transfer_ms,sync_ms,speedup\n";
  auto f = [](double v) { return std::isnan(v) ? std::string() : text::format_double(v); };
  for (const auto& r : report.runs) {
    out << r.k << ',' << to_string(r.method) << ',' << r.demand << ',' << f(r.wall_ms) << ','
        << f(r.compute_ms) << ',' << f(r.transfer_ms) << ',' << f(r.sync_ms) << ','
        << f(r.speedup) << '\n';
  }
}

void emit_plot_data(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  emit_plot_data(report, out);
}

}  // namespace lanesim
