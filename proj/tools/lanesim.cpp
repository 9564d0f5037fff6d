// lanesim: generate | partition | run | bench

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lanesim/bench.hpp"
#include "lanesim/config.hpp"
#include "lanesim/engine.hpp"
#include "lanesim/error.hpp"
#include "lanesim/partitioning.hpp"
#include "lanesim/scenario.hpp"
#include "lanesim/text.hpp"

using namespace lanesim;

namespace {

struct Inputs {
  RoadNetwork net;
  std::vector<Trip> trips;
  std::vector<Route> routes;
};

Inputs load_inputs(const std::string& network_path, const std::string& trips_path) {
  Inputs in;
  in.net = load_network(network_path);
  auto all = load_demand(trips_path, in.net);
  auto routed = route_all(in.net, all);
  for (const auto& f : routed.failures)
    std::cerr << "warning: trip " << f.trip_id << " dropped: " << f.reason << '\n';
  in.trips = std::move(routed.routed_trips);
  in.routes = std::move(routed.routes);
  return in;
}

std::int32_t worker_override(std::int32_t configured) {
  if (const char* env = std::getenv("LANESIM_WORKERS")) {
    auto v = text::parse_number<std::int32_t>(env);
    if (!v || *v < 1) throw ValidationError("LANESIM_WORKERS must be a positive integer");
    return *v;
  }
  return configured;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : text::split(s)) out.emplace_back(part);
  return out;
}

}  // namespace

static std::string ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

int main(int argc, char** argv) {
  CLI::App app{"Lane-map traffic simulator with partitioned parallel execution"};
  app.require_subcommand(1);

  // generate ------------------------------------------------------------
  ScenarioSpec gen;
  std::string gen_out = "scenario";
  bool gen_unsorted = false;
  auto* g = app.add_subcommand("generate", "Write a grid network and seeded uniform demand");
  g->add_option("--cols", gen.cols, "Grid columns")->capture_default_str();
  g->add_option("--rows", gen.rows, "Grid rows")->capture_default_str();
  g->add_option("--trips", gen.trips, "Trip count")->capture_default_str();
  g->add_option("--seed", gen.seed, "Demand seed")->capture_default_str();
  g->add_option("--window-begin", gen.window_begin_s, "First departure time, s")->capture_default_str();
  g->add_option("--window-end", gen.window_end_s, "End of the departure window, s")->capture_default_str();
  g->add_option("--lanes", gen.lanes, "Lanes per link")->capture_default_str();
  g->add_option("--spacing", gen.spacing_m, "Link length, m")->capture_default_str();
  g->add_option("--speed", gen.free_flow_mps, "Free-flow speed, m/s")->capture_default_str();
  g->add_option("--multiplicity-cap", gen.multiplicity_cap, "Max trips per OD pair on average")
      ->capture_default_str();
  g->add_flag("--unsorted", gen_unsorted, "Keep generation order instead of sorting by departure");
  g->add_option("--out", gen_out, "Output directory")->capture_default_str();

  // partition -----------------------------------------------------------
  std::string p_net, p_trips, p_out = "partition.csv", p_method = "balanced";
  std::int32_t p_shards = 2;
  PartitionOptions p_opt;
  std::vector<double> p_window;
  auto* p = app.add_subcommand("partition", "Assign nodes to shards");
  p->add_option("--network", p_net, "Network file")->required();
  p->add_option("--trips", p_trips, "Trip file")->required();
  p->add_option("--method", p_method, "exact | balanced | unbalanced | random")->capture_default_str();
  p->add_option("--shards", p_shards, "Shard count K")->capture_default_str();
  p->add_option("--epsilon", p_opt.epsilon, "Balance tolerance")->capture_default_str();
  p->add_option("--window", p_window, "Departure window BEGIN END in seconds")->expected(2);
  p->add_option("--resolution", p_opt.resolution, "Community resolution")->capture_default_str();
  p->add_option("--seed", p_opt.seed, "Seed for randomized methods")->capture_default_str();
  p->add_option("--out", p_out, "Partition file")->capture_default_str();

  // run -----------------------------------------------------------------
  std::string r_net, r_trips, r_partition, r_config, r_results = "results.csv", r_metrics;
  std::string r_method, r_mode, r_checkpoint_out, r_restore;
  std::vector<std::string> r_sets;
  std::optional<double> r_dt, r_start, r_end;
  std::optional<std::int32_t> r_shards, r_workers;
  std::optional<std::uint64_t> r_seed;
  std::int64_t r_checkpoint_at = -1;
  bool r_check = false, r_stop = false, r_ghost = false;
  auto* r = app.add_subcommand("run", "Simulate and write per-trip results");
  r->add_option("--network", r_net, "Network file")->required();
  r->add_option("--trips", r_trips, "Trip file")->required();
  r->add_option("--partition", r_partition, "Partition file; computed when absent");
  r->add_option("--config", r_config, "Parameter file (key=value)");
  r->add_option("--set", r_sets, "Override one parameter, key=value (repeatable)");
  r->add_option("--dt", r_dt, "Step length, s");
  r->add_option("--start", r_start, "Horizon start, s");
  r->add_option("--end", r_end, "Horizon end, s");
  r->add_option("--shards", r_shards, "Shard count K");
  r->add_option("--workers", r_workers, "Worker threads (LANESIM_WORKERS overrides)");
  r->add_option("--method", r_method, "Partition method when no file is given");
  r->add_option("--mode", r_mode, "strict | fast");
  r->add_option("--seed", r_seed, "Dynamics seed");
  r->add_flag("--check-invariants", r_check, "Verify global invariants after every step");
  r->add_flag("--stop-when-done", r_stop, "End once every trip has finished");
  r->add_flag("--ghost-checksums", r_ghost, "Print per-step ghost-range checksums to stderr");
  r->add_option("--results", r_results, "Results file")->capture_default_str();
  r->add_option("--metrics", r_metrics, "Per-step metrics file");
  r->add_option("--checkpoint-at", r_checkpoint_at, "Write a checkpoint after this many steps");
  r->add_option("--checkpoint-out", r_checkpoint_out, "Checkpoint file");
  r->add_option("--restore", r_restore, "Resume from a checkpoint");

  // bench ---------------------------------------------------------------
  std::string b_net, b_trips, b_out = "bench.csv", b_ks = "1,2,4", b_methods = "balanced";
  ScenarioSpec b_spec;
  b_spec.trips = 100000;
  int b_reps = 3;
  bool b_no_gate = false, b_sorting = false;
  std::optional<std::int32_t> b_workers;
  double b_epsilon = PartitionOptions{}.epsilon;
  double b_end = 0.0;
  auto* b = app.add_subcommand("bench", "Strong-scaling benchmark with a strict-mode gate");
  b->add_option("--network", b_net, "Network file (grid scenario when absent)");
  b->add_option("--trips", b_trips, "Trip file");
  b->add_option("--cols", b_spec.cols, "Grid columns for a generated scenario")->capture_default_str();
  b->add_option("--rows", b_spec.rows, "Grid rows")->capture_default_str();
  b->add_option("--demand", b_spec.trips, "Trips for a generated scenario")->capture_default_str();
  b->add_option("--seed", b_spec.seed, "Demand seed")->capture_default_str();
  b->add_option("--window-end", b_spec.window_end_s, "Departure window end, s")->capture_default_str();
  b->add_option("--end", b_end, "Horizon end, s (default: window end + 1800)");
  b->add_option("--ks", b_ks, "Comma-separated shard counts")->capture_default_str();
  b->add_option("--methods", b_methods, "Comma-separated partition methods")->capture_default_str();
  b->add_option("--reps", b_reps, "Repetitions per configuration")->capture_default_str();
  b->add_option("--workers", b_workers, "Worker threads per run");
  b->add_option("--epsilon", b_epsilon, "Balance tolerance")->capture_default_str();
  b->add_flag("--no-gate", b_no_gate, "Skip the strict-mode equality gate");
  b->add_flag("--sorting", b_sorting, "Also time the same demand in unsorted order");
  b->add_option("--out", b_out, "CSV output")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*g) {
      gen.sort_by_departure = !gen_unsorted;
      write_scenario(generate_grid_scenario(gen), gen_out);
      std::cout << "wrote " << gen_out << "/network.txt and " << gen_out << "/trips.csv\n";
      return 0;
    }

    if (*p) {
      auto in = load_inputs(p_net, p_trips);
      const double begin = p_window.size() == 2 ? p_window[0] : 0.0;
      const double end = p_window.size() == 2 ? p_window[1] : std::numeric_limits<double>::infinity();
      const auto graph = build_traffic_graph(in.net, in.trips, in.routes, begin, end);
      const auto method = parse_partition_method(p_method);
      const auto part = partition_graph(graph, method, p_shards, p_opt);
      save_partition(part, in.net, p_out);
      const auto sizes = part.sizes();
      std::cout << "method " << p_method << ", cut " << text::format_double(cut_weight(graph, part))
                << ", sizes";
      for (auto s : sizes) std::cout << ' ' << s;
      std::cout << '\n';
      return 0;
    }

    if (*r) {
      auto in = load_inputs(r_net, r_trips);
      SimConfig cfg = r_config.empty() ? SimConfig{} : load_config(r_config);
      for (const auto& kv : r_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got " + kv);
        apply_parameter(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (r_dt) cfg.dynamics.dt = *r_dt;
      if (r_start) cfg.start_s = *r_start;
      if (r_end) cfg.end_s = *r_end;
      if (r_shards) cfg.shards = *r_shards;
      if (r_workers) cfg.workers = *r_workers;
      if (!r_method.empty()) cfg.method = parse_partition_method(r_method);
      if (!r_mode.empty()) cfg.mode = parse_determinism_mode(r_mode);
      if (r_seed) cfg.dynamics.seed = *r_seed;
      cfg.check_invariants = cfg.check_invariants || r_check;
      cfg.stop_when_done = cfg.stop_when_done || r_stop;
      cfg.workers = worker_override(cfg.workers);
      if (r_ghost) cfg.ghost_checksum_log = &std::cerr;
      cfg.validate();

      PartitionAssignment part;
      if (!r_partition.empty()) {
        part = load_partition(r_partition, in.net);
        if (!r_shards) cfg.shards = part.shards;
      } else if (cfg.shards == 1) {
        part = PartitionAssignment::single(in.net.node_count());
      } else {
        const auto graph = build_traffic_graph(in.net, in.trips, in.routes, cfg.start_s, cfg.end_s);
        part = partition_graph(graph, cfg.method, cfg.shards);
      }

      Simulation sim(in.net, in.trips, in.routes, part, cfg);
      if (!r_restore.empty()) sim.restore_checkpoint(r_restore);
      if (r_checkpoint_at >= 0) {
        if (r_checkpoint_out.empty()) throw ValidationError("--checkpoint-at needs --checkpoint-out");
        sim.advance(r_checkpoint_at - sim.step());
        sim.save_checkpoint(r_checkpoint_out);
      }
      sim.run();
      write_results(r_results, sim.records());
      if (!r_metrics.empty()) write_metrics(r_metrics, sim.metrics());
      const auto c = sim.counts();
      std::cout << "steps " << sim.step() << ", finished " << c.finished << "/" << c.total
                << ", live " << c.live << ", waiting " << c.waiting << ", wall "
                << ms(sim.metrics().wall_ms) << " ms\n";
      return 0;
    }

    if (*b) {
      Inputs in;
      if (!b_net.empty()) {
        if (b_trips.empty()) throw ValidationError("--network needs --trips");
        in = load_inputs(b_net, b_trips);
      } else {
        auto sc = generate_grid_scenario(b_spec);
        in.net = std::move(sc.net);
        auto routed = route_all(in.net, sc.trips);
        in.trips = std::move(routed.routed_trips);
        in.routes = std::move(routed.routes);
      }
      SimConfig base;
      double last = 0.0;
      for (const auto& t : in.trips) last = std::max(last, t.depart_s);
      base.end_s = b_end > 0 ? b_end : last + 1800.0;
      base.stop_when_done = true;
      BenchOptions opt;
      opt.ks.clear();
      for (const auto& s : split_list(b_ks)) {
        auto k = text::parse_number<std::int32_t>(s);
        if (!k || *k < 1) throw ValidationError("bad shard count '" + s + "'");
        opt.ks.push_back(*k);
      }
      opt.methods.clear();
      for (const auto& s : split_list(b_methods)) opt.methods.push_back(parse_partition_method(s));
      opt.repetitions = b_reps;
      opt.verify_strict = !b_no_gate;
      opt.workers = worker_override(b_workers.value_or(0));
      opt.partition.epsilon = b_epsilon;

      auto report = bench_strong_scaling(in.net, in.trips, in.routes, base, opt);
      emit_plot_data(report, b_out);
      for (auto k : opt.ks)
        for (auto m : opt.methods)
          std::cout << "K=" << k << ' ' << to_string(m) << " median "
                    << ms(report.median_wall_ms(k, m)) << " ms\n";
      for (const auto& n : report.notes) std::cout << "note: " << n << '\n';

      if (b_sorting) {
        // Same trips, generation order versus departure order, at the first K.
        auto order = in.trips;
        std::vector<std::size_t> idx(order.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](auto x, auto y) { return in.trips[x].id < in.trips[y].id; });
        std::vector<Trip> by_id;
        std::vector<Route> by_id_routes;
        for (auto i : idx) {
          by_id.push_back(in.trips[i]);
          by_id_routes.push_back(in.routes[i]);
        }
        BenchOptions one = opt;
        one.ks = {opt.ks.front()};
        one.methods = {opt.methods.front()};
        one.verify_strict = false;
        auto unsorted = bench_strong_scaling(in.net, by_id, by_id_routes, base, one);
        std::cout << "unsorted median "
                  << ms(unsorted.median_wall_ms(one.ks[0], one.methods[0]))
                  << " ms\n";
      }
      return 0;
    }
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
