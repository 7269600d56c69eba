#pragma once

// JSON run configuration (schema "tweezer-config/1"): parsing with full error
// collection, physics sanity diagnostics, and the species data file loader.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tweezer/bands.hpp"
#include "tweezer/chain.hpp"
#include "tweezer/design.hpp"
#include "tweezer/error.hpp"
#include "tweezer/feasibility.hpp"
#include "tweezer/optimize.hpp"
#include "tweezer/robustness.hpp"

namespace tweezer {

using Json = nlohmann::ordered_json;

inline constexpr const char* config_schema = "tweezer-config/1";
inline constexpr const char* species_schema = "tweezer-species/1";

struct Diagnostic {
  std::string level;  ///< "error" or "warning"
  std::string path;   ///< JSON pointer-like location
  std::string message;
};

/// Schema violations, all collected before throwing.
class SchemaError : public ConfigError {
 public:
  explicit SchemaError(std::vector<Diagnostic> d) : ConfigError(summary(d)), diagnostics(std::move(d)) {}
  std::vector<Diagnostic> diagnostics;

 private:
  static std::string summary(const std::vector<Diagnostic>& d) {
    std::ostringstream os;
    os << d.size() << " configuration error(s)";
    if (!d.empty()) os << ": " << d.front().path << ": " << d.front().message;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Run configuration

enum class SystemKind { infinite, finite };

struct FiniteSystem {
  int n_ions = 130;
  int n_buffer = 15;
  double epsilon = 0.07;
  double gamma_y = 0.8;
  int p = 6;
  int offset = -1;     ///< first pinned ion; -1 means n_buffer
  int pairs = 0;       ///< pinned pairs; 0 fills the register
  double nu0 = 0.4;
  double nu0_alt = -1.0;  ///< pinning of every other pair; < 0 means nu0
  bool dense = false;  ///< gate every register pair instead of only the pinned pairs

  int first_pinned() const { return offset < 0 ? n_buffer : offset; }
  int pinned_pairs() const {
    if (pairs > 0) return pairs;
    return (n_ions - n_buffer - first_pinned() - 2) / p + 1;
  }
};

struct SystemConfig {
  SystemKind kind = SystemKind::infinite;
  CellConfig cell;
  FiniteSystem finite;
};

struct SweepConfig {
  int p = 6;
  std::vector<double> epsilons;
  std::vector<double> nu0s;
  double level = 1e-3;
};

struct MisadjustConfig {
  MisadjustSpec spec;
  std::vector<double> sigmas{0.04};
  std::vector<Channel> channels{Channel::combined};
  double spacing_um = 10.0;   ///< only for the physical-unit conversion in reports
  double omega_x_mhz = 3.0;
};

struct SwitchConfig {
  SwitchSpec spec;
  std::vector<double> times{100.0, 300.0, 1000.0, 3000.0};  ///< omega_x tau_s
};

struct FeasibilityConfig {
  std::string species_file = "data/species.json";
  std::vector<std::string> species;  ///< empty means all
  double nu0 = 0.4;
  double epsilon = 0.07;
  OpticsConfig optics;
  double scan_lo_nm = 0.0, scan_hi_nm = 0.0;  ///< scan disabled when equal
  int scan_points = 200;
};

struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  SystemConfig system;
  Direction direction = Direction::x;
  int k_points = 200;
  DesignSpec design;
  SweepConfig sweep;
  OptimizeSpec optimize;
  MisadjustConfig misadjust;
  SwitchConfig switching;
  FeasibilityConfig feasibility;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"modes", "bands", "design", "sweep", "optimize", "misadjust", "switch",
                                          "feasibility"};
  return c;
}

namespace detail {

/// Walks a JSON document, recording every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<Diagnostic> diags;

  void error(const std::string& path, const std::string& msg) { diags.push_back({"error", path, msg}); }
  void warning(const std::string& path, const std::string& msg) { diags.push_back({"warning", path, msg}); }

  bool object(const Json& j, const std::string& path) {
    if (j.is_object()) return true;
    error(path, "expected an object");
    return false;
  }

  void known(const Json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) return;
    std::set<std::string> k(keys.begin(), keys.end());
    for (const auto& [name, _] : j.items())
      if (!k.count(name)) error(path + "/" + name, "unknown field");
  }

  template <typename T>
  void get(const Json& j, const std::string& path, const char* key, T& out, bool required = false) {
    if (!j.is_object() || !j.contains(key)) {
      if (required) error(path + "/" + key, "missing required field");
      return;
    }
    convert(j.at(key), path + "/" + key, out);
  }

  void convert(const Json& v, const std::string& path, double& out) {
    if (v.is_number()) out = v.get<double>();
    else error(path, "expected a number");
  }
  void convert(const Json& v, const std::string& path, int& out) {
    if (v.is_number_integer()) out = v.get<int>();
    else error(path, "expected an integer");
  }
  void convert(const Json& v, const std::string& path, std::uint64_t& out) {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) out = v.get<std::uint64_t>();
    else error(path, "expected a non-negative integer");
  }
  void convert(const Json& v, const std::string& path, bool& out) {
    if (v.is_boolean()) out = v.get<bool>();
    else error(path, "expected true or false");
  }
  void convert(const Json& v, const std::string& path, std::string& out) {
    if (v.is_string()) out = v.get<std::string>();
    else error(path, "expected a string");
  }
  template <typename T>
  void convert(const Json& v, const std::string& path, std::vector<T>& out) {
    if (!v.is_array()) {
      error(path, "expected an array");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      T x{};
      convert(v[i], path + "/" + std::to_string(i), x);
      out.push_back(x);
    }
  }

  /// Numbers given either as an explicit list or as {"start", "stop", "points"} (inclusive, linear).
  void grid(const Json& j, const std::string& path, const char* key, std::vector<double>& out, bool required) {
    if (!j.is_object() || !j.contains(key)) {
      if (required) error(path + "/" + key, "missing required field");
      return;
    }
    const Json& v = j.at(key);
    const std::string p = path + "/" + key;
    if (v.is_array()) {
      convert(v, p, out);
      return;
    }
    if (!object(v, p)) return;
    known(v, p, {"start", "stop", "points"});
    double a = 0, b = 0;
    int n = 0;
    get(v, p, "start", a, true);
    get(v, p, "stop", b, true);
    get(v, p, "points", n, true);
    if (n < 1) {
      error(p + "/points", "need at least one point");
      return;
    }
    out.clear();
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  }

  /// Runs a parse step that may throw ConfigError from a from_string helper.
  template <typename Fn>
  void guarded(const std::string& path, Fn&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      error(path, e.what());
    }
  }

  /// Range checks are phrased as the condition that must hold.
  void check(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) error(path, msg);
  }
};

inline void parse_cell(Reader& r, const Json& j, const std::string& path, CellConfig& c) {
  r.get(j, path, "p", c.p, true);
  r.get(j, path, "epsilon", c.epsilon, true);
  r.get(j, path, "nu0", c.nu0, true);
  r.get(j, path, "pinned_slots", c.pinned_slots);
  r.get(j, path, "gamma_y", c.gamma_y);
}

inline void parse_system(Reader& r, const Json& j, const std::string& path, SystemConfig& s) {
  if (!r.object(j, path)) return;
  std::string kind;
  r.get(j, path, "kind", kind, true);
  if (kind == "infinite") {
    s.kind = SystemKind::infinite;
    r.known(j, path, {"kind", "p", "epsilon", "nu0", "pinned_slots", "gamma_y"});
    parse_cell(r, j, path, s.cell);
    r.check(s.cell.p >= 3, path + "/p", "cell size p must be >= 3 (a pinned pair plus at least one spectator)");
    r.check(s.cell.epsilon > 0 && s.cell.epsilon < 1, path + "/epsilon", "epsilon must lie in (0, 1)");
    r.check(s.cell.nu0 >= 0 && s.cell.nu0 <= 1, path + "/nu0", "nu0 must lie in [0, 1]");
    r.check(s.cell.gamma_y > 0 && s.cell.gamma_y <= 1, path + "/gamma_y", "gamma_y must lie in (0, 1]");
    if (s.cell.p >= 3) {
      bool ok = s.cell.pinned_slots.size() >= 2 && static_cast<int>(s.cell.pinned_slots.size()) < s.cell.p;
      std::set<int> seen;
      for (int v : s.cell.pinned_slots) ok = ok && v >= 0 && v < s.cell.p && seen.insert(v).second;
      r.check(ok, path + "/pinned_slots", "pinned slots must be distinct, within [0, p) and leave a spectator");
    }
  } else if (kind == "finite") {
    s.kind = SystemKind::finite;
    FiniteSystem& f = s.finite;
    r.known(j, path, {"kind", "n_ions", "n_buffer", "epsilon", "gamma_y", "p", "offset", "pairs", "nu0", "nu0_alt",
                      "dense"});
    r.get(j, path, "n_ions", f.n_ions, true);
    r.get(j, path, "n_buffer", f.n_buffer);
    r.get(j, path, "epsilon", f.epsilon, true);
    r.get(j, path, "gamma_y", f.gamma_y);
    r.get(j, path, "p", f.p, true);
    r.get(j, path, "offset", f.offset);
    r.get(j, path, "pairs", f.pairs);
    r.get(j, path, "nu0", f.nu0, true);
    r.get(j, path, "nu0_alt", f.nu0_alt);
    r.get(j, path, "dense", f.dense);
    r.check(f.n_ions >= 2, path + "/n_ions", "need at least two ions");
    r.check(f.n_buffer >= 0 && 2 * f.n_buffer < f.n_ions - 1, path + "/n_buffer", "buffers leave fewer than two qubits");
    r.check(f.epsilon > 0 && f.epsilon < 0.3, path + "/epsilon", "epsilon must lie in (0, 0.3)");
    r.check(f.gamma_y > 0 && f.gamma_y <= 1, path + "/gamma_y", "gamma_y must lie in (0, 1]");
    r.check(f.p >= 3, path + "/p", "cell size p must be >= 3 (a pinned pair plus at least one spectator)");
    r.check(f.nu0 >= 0 && f.nu0 <= 1, path + "/nu0", "nu0 must lie in [0, 1]");
    r.check(f.nu0_alt < 0 || f.nu0_alt <= 1, path + "/nu0_alt", "nu0_alt must lie in [0, 1]");
    r.check(f.pairs >= 0, path + "/pairs", "pairs must be >= 0");
    if (f.p >= 3 && f.n_ions >= 2 && f.n_buffer >= 0 && 2 * f.n_buffer < f.n_ions - 1) {
      const int last = f.first_pinned() + (f.pinned_pairs() - 1) * f.p + 1;
      r.check(f.pinned_pairs() >= 1 && f.first_pinned() >= 0 && last < f.n_ions, path,
              "pinning pattern does not fit in the chain");
    }
  } else if (!kind.empty()) {
    r.error(path + "/kind", "kind must be 'infinite' or 'finite'");
  }
}

inline void parse_design(Reader& r, const Json& j, const std::string& path, DesignSpec& d) {
  if (!r.object(j, path)) return;
  r.known(j, path, {"mode", "chi_magnitude", "k_points", "scan_halfwidth", "scan_points", "mu_tolerance", "n_th",
                    "crosstalk_cells", "pair_frequencies"});
  std::string mode = to_string(d.mode), rule = to_string(d.pair_frequencies);
  r.get(j, path, "mode", mode);
  r.guarded(path + "/mode", [&] { d.mode = mode_choice_from_string(mode); });
  r.get(j, path, "chi_magnitude", d.chi_magnitude);
  r.get(j, path, "k_points", d.k_points);
  r.get(j, path, "scan_halfwidth", d.scan_halfwidth);
  r.get(j, path, "scan_points", d.scan_points);
  r.get(j, path, "mu_tolerance", d.mu_tolerance);
  r.get(j, path, "n_th", d.n_th);
  r.get(j, path, "crosstalk_cells", d.crosstalk_cells);
  r.get(j, path, "pair_frequencies", rule);
  r.guarded(path + "/pair_frequencies", [&] { d.pair_frequencies = pair_frequency_rule_from_string(rule); });
  r.guarded(path, [&] { d.validate(); });
}

inline void parse_optimize(Reader& r, const Json& j, const std::string& path, OptimizeSpec& o) {
  if (!r.object(j, path)) return;
  r.known(j, path, {"segments", "groups", "duration", "restarts", "mu_points", "window_margin", "pair_window_margin",
                    "max_rabi", "target", "cost_cells", "k_points", "crosstalk_cells", "n_th", "alpha_cost",
                    "deltaF_thresh", "iterations", "candidate_cap", "crosstalk_neighbors", "method",
                    "newton_polish", "max_iterations"});
  std::string cost = to_string(o.alpha_cost), method = to_string(o.method);
  r.get(j, path, "segments", o.segments);
  r.get(j, path, "groups", o.groups);
  r.get(j, path, "duration", o.duration);
  r.get(j, path, "restarts", o.restarts);
  r.get(j, path, "mu_points", o.mu_points);
  r.get(j, path, "window_margin", o.window_margin);
  r.get(j, path, "pair_window_margin", o.pair_window_margin);
  r.get(j, path, "max_rabi", o.max_rabi);
  r.get(j, path, "target", o.target);
  r.get(j, path, "cost_cells", o.cost_cells);
  r.get(j, path, "k_points", o.k_points);
  r.get(j, path, "crosstalk_cells", o.crosstalk_cells);
  r.get(j, path, "n_th", o.n_th);
  r.get(j, path, "alpha_cost", cost);
  r.guarded(path + "/alpha_cost", [&] { o.alpha_cost = alpha_cost_from_string(cost); });
  r.get(j, path, "deltaF_thresh", o.deltaF_thresh);
  r.get(j, path, "iterations", o.iterations);
  r.get(j, path, "candidate_cap", o.candidate_cap);
  r.get(j, path, "crosstalk_neighbors", o.crosstalk_neighbors);
  r.get(j, path, "method", method);
  r.guarded(path + "/method", [&] { o.method = minimizer_from_string(method); });
  r.get(j, path, "newton_polish", o.newton_polish);
  r.get(j, path, "max_iterations", o.minimizer.max_iterations);
  r.guarded(path, [&] { o.validate(); });
}

inline void parse_misadjust(Reader& r, const Json& j, const std::string& path, MisadjustConfig& m) {
  if (!r.object(j, path)) return;
  r.known(j, path, {"sigmas", "channels", "realizations", "intensity_scale", "perturbative", "spacing_um",
                    "omega_x_mhz"});
  r.grid(j, path, "sigmas", m.sigmas, false);
  std::vector<std::string> ch;
  for (Channel c : m.channels) ch.push_back(to_string(c));
  r.get(j, path, "channels", ch);
  m.channels.clear();
  for (std::size_t i = 0; i < ch.size(); ++i)
    r.guarded(path + "/channels/" + std::to_string(i), [&] { m.channels.push_back(channel_from_string(ch[i])); });
  r.get(j, path, "realizations", m.spec.realizations);
  r.get(j, path, "intensity_scale", m.spec.intensity_scale);
  r.get(j, path, "perturbative", m.spec.perturbative);
  r.get(j, path, "spacing_um", m.spacing_um);
  r.get(j, path, "omega_x_mhz", m.omega_x_mhz);
  r.check(m.spacing_um > 0, path + "/spacing_um", "spacing must be positive");
  r.check(m.omega_x_mhz > 0, path + "/omega_x_mhz", "omega_x must be positive");
  r.check(!m.sigmas.empty(), path + "/sigmas", "need at least one sigma");
  for (double s : m.sigmas) r.check(s >= 0, path + "/sigmas", "sigma must be non-negative");
  r.check(!ch.empty(), path + "/channels", "need at least one channel");
  r.guarded(path, [&] { m.spec.validate(); });
}

inline void parse_switch(Reader& r, const Json& j, const std::string& path, SwitchConfig& s) {
  if (!r.object(j, path)) return;
  r.known(j, path, {"p", "epsilon", "nu0", "k_points", "times"});
  r.get(j, path, "p", s.spec.p);
  r.get(j, path, "epsilon", s.spec.epsilon);
  r.get(j, path, "nu0", s.spec.nu0);
  r.get(j, path, "k_points", s.spec.k_points);
  r.grid(j, path, "times", s.times, false);
  for (double t : s.times) r.check(t > 0, path + "/times", "switching times must be positive");
  r.guarded(path, [&] { s.spec.validate(); });
}

inline void parse_feasibility(Reader& r, const Json& j, const std::string& path, FeasibilityConfig& f) {
  if (!r.object(j, path)) return;
  r.known(j, path, {"species_file", "species", "nu0", "epsilon", "numerical_aperture", "omega_x_mhz",
                    "frequency_ratio", "scan"});
  r.get(j, path, "species_file", f.species_file);
  r.get(j, path, "species", f.species);
  r.get(j, path, "nu0", f.nu0);
  r.get(j, path, "epsilon", f.epsilon);
  r.get(j, path, "numerical_aperture", f.optics.numerical_aperture);
  double mhz = f.optics.omega_x / (2.0 * std::numbers::pi * 1e6);
  r.get(j, path, "omega_x_mhz", mhz);
  f.optics.omega_x = 2.0 * std::numbers::pi * 1e6 * mhz;
  r.get(j, path, "frequency_ratio", f.optics.frequency_ratio);
  if (j.contains("scan")) {
    const std::string p = path + "/scan";
    const Json& s = j.at("scan");
    if (r.object(s, p)) {
      r.known(s, p, {"lo_nm", "hi_nm", "points"});
      r.get(s, p, "lo_nm", f.scan_lo_nm, true);
      r.get(s, p, "hi_nm", f.scan_hi_nm, true);
      r.get(s, p, "points", f.scan_points);
      r.check(f.scan_hi_nm > f.scan_lo_nm && f.scan_lo_nm > 0, p, "scan needs 0 < lo_nm < hi_nm");
      r.check(f.scan_points >= 2, p + "/points", "scan needs at least 2 points");
    }
  }
  r.check(f.nu0 > 0 && f.nu0 <= 1, path + "/nu0", "nu0 must lie in (0, 1]");
  r.check(f.epsilon > 0 && f.epsilon < 1, path + "/epsilon", "epsilon must lie in (0, 1)");
  r.guarded(path, [&] { f.optics.validate(); });
}

}  // namespace detail

/// Physics sanity checks on a parsed configuration (warnings only).
inline std::vector<Diagnostic> physics_diagnostics(const RunConfig& c) {
  std::vector<Diagnostic> d;
  auto pinning_ratio = [&](double nu0, double eps, const std::string& path) {
    if (eps <= 0) return;
    const double ratio = nu0 * nu0 / (eps * eps);
    if (ratio < 10.0) {
      std::ostringstream os;
      os << "weak pinning: nu0^2/epsilon^2 = " << ratio << " < 10; modes are not well localized";
      d.push_back({"warning", path, os.str()});
    }
  };
  const bool uses_system = c.command != "sweep" && c.command != "switch" && c.command != "feasibility";
  if (uses_system && c.system.kind == SystemKind::infinite) {
    pinning_ratio(c.system.cell.nu0, c.system.cell.epsilon, "/system/nu0");
  } else if (uses_system) {
    const FiniteSystem& f = c.system.finite;
    pinning_ratio(f.nu0, f.epsilon, "/system/nu0");
    if (f.nu0_alt >= 0) pinning_ratio(f.nu0_alt, f.epsilon, "/system/nu0_alt");
    try {
      const Eigen::VectorXd u = detail::solve_scaled_equilibrium(f.n_ions);
      const double gamma = f.epsilon * std::pow(detail::mean_spacing_scaled(u, f.n_buffer), 1.5);
      const double threshold = zigzag_gamma_threshold(f.n_ions, f.gamma_y);
      if (gamma >= threshold) {
        d.push_back({"warning", "/system/epsilon", "target epsilon requires gamma_z beyond the zigzag threshold"});
      } else if (gamma > 0.8 * threshold) {
        std::ostringstream os;
        os << "close to the zigzag transition: gamma_z = " << gamma << " is " << 100.0 * gamma / threshold
           << "% of the threshold " << threshold;
        d.push_back({"warning", "/system/epsilon", os.str()});
      }
    } catch (const std::exception& e) {
      d.push_back({"warning", "/system", std::string("equilibrium check failed: ") + e.what()});
    }
  }
  if (c.command == "sweep")
    for (double nu : c.sweep.nu0s)
      for (double eps : c.sweep.epsilons) pinning_ratio(nu, eps, "/sweep");
  if (c.command == "switch") pinning_ratio(c.switching.spec.nu0, c.switching.spec.epsilon, "/switch");
  // Sweeps naturally cover weak pinning; keep one warning per grid.
  if (c.command == "sweep") {
    int n = 0;
    for (auto it = d.begin(); it != d.end();) {
      if (it->path == "/sweep" && n++ > 0) it = d.erase(it);
      else ++it;
    }
  }
  return d;
}

/// Parses and validates a configuration. Throws SchemaError listing every
/// schema violation; returns physics warnings through `warnings`.
inline RunConfig parse_config(const Json& j, std::vector<Diagnostic>* warnings = nullptr) {
  detail::Reader r;
  RunConfig c;
  if (!j.is_object()) {
    r.error("", "configuration must be a JSON object");
    throw SchemaError(r.diags);
  }
  r.known(j, "", {"schema", "command", "seed", "system", "direction", "k_points", "design", "sweep", "optimize",
                  "misadjust", "switch", "feasibility", "note"});
  std::string schema;
  r.get(j, "", "schema", schema, true);
  if (!schema.empty() && schema != config_schema) r.error("/schema", "unsupported schema '" + schema + "'");
  r.get(j, "", "command", c.command, true);
  bool known_command = false;
  for (const auto& k : commands()) known_command = known_command || k == c.command;
  if (!c.command.empty() && !known_command) r.error("/command", "unknown command '" + c.command + "'");
  r.get(j, "", "seed", c.seed);
  std::string dir = to_string(c.direction);
  r.get(j, "", "direction", dir);
  r.guarded("/direction", [&] { c.direction = direction_from_string(dir); });
  r.get(j, "", "k_points", c.k_points);
  r.check(c.k_points >= 2, "/k_points", "k grid needs at least 2 points");

  const std::string& cmd = c.command;
  const bool needs_system = cmd == "modes" || cmd == "bands" || cmd == "design" || cmd == "optimize" ||
                            cmd == "misadjust";
  if (needs_system || j.contains("system")) {
    if (j.contains("system")) detail::parse_system(r, j.at("system"), "/system", c.system);
    else r.error("/system", "missing required field");
  }
  if (j.contains("design")) detail::parse_design(r, j.at("design"), "/design", c.design);
  if (j.contains("optimize")) detail::parse_optimize(r, j.at("optimize"), "/optimize", c.optimize);
  c.optimize.seed = c.seed;
  c.misadjust.spec.seed = c.seed;
  if (j.contains("misadjust")) detail::parse_misadjust(r, j.at("misadjust"), "/misadjust", c.misadjust);
  if (j.contains("switch")) detail::parse_switch(r, j.at("switch"), "/switch", c.switching);
  if (j.contains("feasibility")) detail::parse_feasibility(r, j.at("feasibility"), "/feasibility", c.feasibility);

  if (cmd == "sweep") {
    if (!j.contains("sweep")) {
      r.error("/sweep", "missing required field");
    } else if (r.object(j.at("sweep"), "/sweep")) {
      const Json& s = j.at("sweep");
      r.known(s, "/sweep", {"p", "epsilons", "nu0s", "level"});
      r.get(s, "/sweep", "p", c.sweep.p, true);
      r.grid(s, "/sweep", "epsilons", c.sweep.epsilons, true);
      r.grid(s, "/sweep", "nu0s", c.sweep.nu0s, true);
      r.get(s, "/sweep", "level", c.sweep.level);
      r.check(c.sweep.p >= 3, "/sweep/p", "cell size p must be >= 3 (a pinned pair plus at least one spectator)");
      for (double e : c.sweep.epsilons) r.check(e > 0 && e < 1, "/sweep/epsilons", "epsilon must lie in (0, 1)");
      for (double v : c.sweep.nu0s) r.check(v > 0 && v <= 1, "/sweep/nu0s", "nu0 must lie in (0, 1]");
      r.check(c.sweep.level > 0, "/sweep/level", "contour level must be positive");
    }
  }
  if (cmd == "bands") r.check(c.system.kind == SystemKind::infinite, "/system/kind", "bands needs an infinite system");
  if (cmd == "misadjust")
    r.check(c.system.kind == SystemKind::finite, "/system/kind", "misadjust needs a finite system");
  if (cmd == "optimize" && c.system.kind == SystemKind::infinite) {
    const CellConfig& cell = c.system.cell;
    r.check(cell.p % 2 == 0 && cell.p >= 4, "/system/p", "dense optimization needs an even cell size p >= 4");
    r.check(cell.pinned_slots.size() == 2 && cell.pinned_slots[0] == 0 && cell.pinned_slots[1] == 1,
            "/system/pinned_slots", "dense optimization expects pinned slots [0, 1]");
  }

  if (!r.diags.empty()) throw SchemaError(r.diags);
  if (warnings) *warnings = physics_diagnostics(c);
  return c;
}

/// Fully resolved configuration in the input schema; parse_config(to_json(c)) == c.
inline Json to_json(const RunConfig& c) {
  Json j;
  j["schema"] = config_schema;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["direction"] = to_string(c.direction);
  j["k_points"] = c.k_points;
  Json& s = j["system"];
  if (c.system.kind == SystemKind::infinite) {
    const CellConfig& cell = c.system.cell;
    s = {{"kind", "infinite"}, {"p", cell.p}, {"epsilon", cell.epsilon}, {"nu0", cell.nu0},
         {"pinned_slots", cell.pinned_slots}, {"gamma_y", cell.gamma_y}};
  } else {
    const FiniteSystem& f = c.system.finite;
    s = {{"kind", "finite"}, {"n_ions", f.n_ions}, {"n_buffer", f.n_buffer}, {"epsilon", f.epsilon},
         {"gamma_y", f.gamma_y}, {"p", f.p}, {"offset", f.offset}, {"pairs", f.pairs}, {"nu0", f.nu0},
         {"nu0_alt", f.nu0_alt}, {"dense", f.dense}};
  }
  const DesignSpec& d = c.design;
  j["design"] = {{"mode", to_string(d.mode)}, {"chi_magnitude", d.chi_magnitude}, {"k_points", d.k_points},
                 {"scan_halfwidth", d.scan_halfwidth}, {"scan_points", d.scan_points},
                 {"mu_tolerance", d.mu_tolerance}, {"n_th", d.n_th}, {"crosstalk_cells", d.crosstalk_cells},
                 {"pair_frequencies", to_string(d.pair_frequencies)}};
  if (c.command == "sweep")
    j["sweep"] = {{"p", c.sweep.p}, {"epsilons", c.sweep.epsilons}, {"nu0s", c.sweep.nu0s}, {"level", c.sweep.level}};
  const OptimizeSpec& o = c.optimize;
  j["optimize"] = {{"segments", o.segments}, {"groups", o.groups}, {"duration", o.duration}, {"restarts", o.restarts},
                   {"mu_points", o.mu_points}, {"window_margin", o.window_margin},
                   {"pair_window_margin", o.pair_window_margin}, {"max_rabi", o.max_rabi}, {"target", o.target},
                   {"cost_cells", o.cost_cells}, {"k_points", o.k_points}, {"crosstalk_cells", o.crosstalk_cells},
                   {"n_th", o.n_th}, {"alpha_cost", to_string(o.alpha_cost)}, {"deltaF_thresh", o.deltaF_thresh},
                   {"iterations", o.iterations}, {"candidate_cap", o.candidate_cap},
                   {"crosstalk_neighbors", o.crosstalk_neighbors}, {"method", to_string(o.method)},
                   {"newton_polish", o.newton_polish}, {"max_iterations", o.minimizer.max_iterations}};
  std::vector<std::string> ch;
  for (Channel x : c.misadjust.channels) ch.push_back(to_string(x));
  j["misadjust"] = {{"sigmas", c.misadjust.sigmas}, {"channels", ch}, {"realizations", c.misadjust.spec.realizations},
                    {"intensity_scale", c.misadjust.spec.intensity_scale},
                    {"perturbative", c.misadjust.spec.perturbative}, {"spacing_um", c.misadjust.spacing_um},
                    {"omega_x_mhz", c.misadjust.omega_x_mhz}};
  const SwitchSpec& w = c.switching.spec;
  j["switch"] = {{"p", w.p}, {"epsilon", w.epsilon}, {"nu0", w.nu0}, {"k_points", w.k_points},
                 {"times", c.switching.times}};
  const FeasibilityConfig& f = c.feasibility;
  j["feasibility"] = {{"species_file", f.species_file}, {"species", f.species}, {"nu0", f.nu0},
                      {"epsilon", f.epsilon}, {"numerical_aperture", f.optics.numerical_aperture},
                      {"omega_x_mhz", f.optics.omega_x / (2.0 * std::numbers::pi * 1e6)},
                      {"frequency_ratio", f.optics.frequency_ratio}};
  if (f.scan_hi_nm > f.scan_lo_nm)
    j["feasibility"]["scan"] = {{"lo_nm", f.scan_lo_nm}, {"hi_nm", f.scan_hi_nm}, {"points", f.scan_points}};
  return j;
}

// ---------------------------------------------------------------------------
// Finite-chain setup

struct FiniteSetup {
  IonChain chain;
  TweezerArray tweezers;
  std::vector<std::pair<int, int>> pinned;  ///< pinned pairs
  std::vector<std::pair<int, int>> gates;   ///< pinned pairs, or every register pair when dense
};

/// Calibrates the axial trap for the target spacing and lays out the tweezers.
inline FiniteSetup build_finite(const FiniteSystem& f) {
  FiniteSetup s;
  s.chain = solve_equilibrium(calibrate_gamma_for_epsilon(f.n_ions, f.n_buffer, f.epsilon, f.gamma_y));
  const int count = f.pinned_pairs();
  const double alt = f.nu0_alt < 0 ? f.nu0 : f.nu0_alt;
  s.tweezers = TweezerArray{periodic_pinning(f.n_ions, f.p, f.first_pinned(), count, f.nu0, alt), std::nullopt};
  s.pinned = periodic_pairs(f.first_pinned(), f.p, count);
  s.gates = f.dense ? dense_pairs(s.chain) : s.pinned;
  return s;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError({{"error", "", std::string("invalid JSON: ") + e.what()}});
  }
}

/// Schema errors plus physics warnings for a configuration file.
inline std::vector<Diagnostic> validate_config(const std::string& path) {
  const Json j = read_json_file(path);
  std::vector<Diagnostic> w;
  try {
    parse_config(j, &w);
  } catch (const SchemaError& e) {
    return e.diagnostics;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Species data

inline std::vector<SpeciesData> parse_species(const Json& j) {
  detail::Reader r;
  std::vector<SpeciesData> out;
  if (r.object(j, "")) {
    std::string schema;
    r.get(j, "", "schema", schema, true);
    if (!schema.empty() && schema != species_schema) r.error("/schema", "unsupported schema '" + schema + "'");
    if (!j.contains("species") || !j.at("species").is_array()) {
      r.error("/species", "expected an array of species");
    } else {
      const Json& arr = j.at("species");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = "/species/" + std::to_string(i);
        const Json& s = arr[i];
        if (!r.object(s, p)) continue;
        r.known(s, p, {"name", "mass_amu", "tweezer_wavelength_nm", "transitions", "source"});
        SpeciesData d;
        r.get(s, p, "name", d.name, true);
        r.get(s, p, "mass_amu", d.mass_amu, true);
        r.get(s, p, "tweezer_wavelength_nm", d.tweezer_wavelength_nm, true);
        r.get(s, p, "source", d.source);
        if (s.contains("transitions") && s.at("transitions").is_array()) {
          const Json& ts = s.at("transitions");
          for (std::size_t t = 0; t < ts.size(); ++t) {
            const std::string tp = p + "/transitions/" + std::to_string(t);
            if (!r.object(ts[t], tp)) continue;
            r.known(ts[t], tp, {"wavelength_nm", "linewidth"});
            Transition tr;
            r.get(ts[t], tp, "wavelength_nm", tr.wavelength_nm, true);
            r.get(ts[t], tp, "linewidth", tr.linewidth, true);
            d.transitions.push_back(tr);
          }
        } else {
          r.error(p + "/transitions", "expected an array of transitions");
        }
        r.guarded(p, [&] { d.validate(); });
        out.push_back(d);
      }
    }
  }
  if (!r.diags.empty()) throw SchemaError(r.diags);
  return out;
}

inline std::vector<SpeciesData> load_species(const std::string& path) { return parse_species(read_json_file(path)); }

}  // namespace tweezer
