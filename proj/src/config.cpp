#include "lanesim/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

double real(std::string_view key, std::string_view v) {
  auto x = text::parse_number<double>(v);
  if (!x) throw ValidationError("parameter " + std::string(key) + " needs a number");
  return *x;
}

template <typename T>
T integer(std::string_view key, std::string_view v) {
  auto x = text::parse_number<T>(v);
  if (!x) throw ValidationError("parameter " + std::string(key) + " needs an integer");
  return *x;
}

bool boolean(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ValidationError("parameter " + std::string(key) + " needs true or false");
}

using Setter = std::function<void(SimConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"dt", [](auto& c, auto k, auto v) { c.dynamics.dt = real(k, v); }},
      {"start_s", [](auto& c, auto k, auto v) { c.start_s = real(k, v); }},
      {"end_s", [](auto& c, auto k, auto v) { c.end_s = real(k, v); }},
      {"shards", [](auto& c, auto k, auto v) { c.shards = integer<std::int32_t>(k, v); }},
      {"workers", [](auto& c, auto k, auto v) { c.workers = integer<std::int32_t>(k, v); }},
      {"method", [](auto& c, auto, auto v) { c.method = parse_partition_method(v); }},
      {"mode", [](auto& c, auto, auto v) { c.mode = parse_determinism_mode(v); }},
      {"seed", [](auto& c, auto k, auto v) { c.dynamics.seed = integer<std::uint64_t>(k, v); }},
      {"signal_cycle_s", [](auto& c, auto k, auto v) { c.dynamics.signal_cycle_s = real(k, v); }},
      {"check_invariants", [](auto& c, auto k, auto v) { c.check_invariants = boolean(k, v); }},
      {"stop_when_done", [](auto& c, auto k, auto v) { c.stop_when_done = boolean(k, v); }},
      {"idm.a", [](auto& c, auto k, auto v) { c.dynamics.idm.a = real(k, v); }},
      {"idm.b", [](auto& c, auto k, auto v) { c.dynamics.idm.b = real(k, v); }},
      {"idm.delta", [](auto& c, auto k, auto v) { c.dynamics.idm.delta = real(k, v); }},
      {"idm.s0", [](auto& c, auto k, auto v) { c.dynamics.idm.s0 = real(k, v); }},
      {"idm.T", [](auto& c, auto k, auto v) { c.dynamics.idm.time_headway = real(k, v); }},
      {"idm.emergency_brake", [](auto& c, auto k, auto v) { c.dynamics.idm.emergency_brake = real(k, v); }},
      {"lc.x0", [](auto& c, auto k, auto v) { c.dynamics.lane_change.x0 = real(k, v); }},
      {"gap.g_a", [](auto& c, auto k, auto v) { c.dynamics.gap.g_a = real(k, v); }},
      {"gap.g_b", [](auto& c, auto k, auto v) { c.dynamics.gap.g_b = real(k, v); }},
      {"gap.alpha_a", [](auto& c, auto k, auto v) { c.dynamics.gap.alpha_a = real(k, v); }},
      {"gap.alpha_b", [](auto& c, auto k, auto v) { c.dynamics.gap.alpha_b = real(k, v); }},
      {"gap.alpha_i", [](auto& c, auto k, auto v) { c.dynamics.gap.alpha_i = real(k, v); }},
      {"gap.sigma_a", [](auto& c, auto k, auto v) { c.dynamics.gap.sigma_a = real(k, v); }},
      {"gap.sigma_b", [](auto& c, auto k, auto v) { c.dynamics.gap.sigma_b = real(k, v); }},
  };
  return table;
}

}  // namespace

void apply_parameter(SimConfig& cfg, std::string_view key, std::string_view value) {
  key = text::trim(key);
  value = text::trim(value);
  auto it = setters().find(key);
  if (it == setters().end()) throw ValidationError("unknown parameter '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

SimConfig load_config(const std::filesystem::path& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open parameter file " + path.string());
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (text::is_skippable(raw)) continue;
    const auto line = text::trim(raw);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), line_no, "expected key=value");
    try {
      apply_parameter(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  base.validate();
  return base;
}

void save_config(const SimConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write parameter file " + path.string());
  const auto& d = c.dynamics;
  auto f = [](double v) { return text::format_double(v); };
  out << "dt=" << f(d.dt) << "\nstart_s=" << f(c.start_s) << "\nend_s=" << f(c.end_s)
      << "\nshards=" << c.shards << "\nworkers=" << c.workers << "\nmethod=" << to_string(c.method)
      << "\nmode=" << to_string(c.mode) << "\nseed=" << d.seed
      << "\nsignal_cycle_s=" << f(d.signal_cycle_s)
      << "\ncheck_invariants=" << (c.check_invariants ? "true" : "false")
      << "\nstop_when_done=" << (c.stop_when_done ? "true" : "false") << "\nidm.a=" << f(d.idm.a)
      << "\nidm.b=" << f(d.idm.b) << "\nidm.delta=" << f(d.idm.delta) << "\nidm.s0=" << f(d.idm.s0)
      << "\nidm.T=" << f(d.idm.time_headway) << "\nidm.emergency_brake=" << f(d.idm.emergency_brake)
      << "\nlc.x0=" << f(d.lane_change.x0) << "\ngap.g_a=" << f(d.gap.g_a)
      << "\ngap.g_b=" << f(d.gap.g_b) << "\ngap.alpha_a=" << f(d.gap.alpha_a)
      << "\ngap.alpha_b=" << f(d.gap.alpha_b) << "\ngap.alpha_i=" << f(d.gap.alpha_i)
      << "\ngap.sigma_a=" << f(d.gap.sigma_a) << "\ngap.sigma_b=" << f(d.gap.sigma_b) << '\n';
}

}  // namespace lanesim
