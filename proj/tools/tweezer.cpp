// tweezer: command-line front end. One subcommand per scenario; every run
// writes manifest.json, result.json and CSV tables into its output directory.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <gsl/gsl_version.h>

#include "CLI11.hpp"
#include "tweezer/config.hpp"
#include "tweezer/io.hpp"

namespace fs = std::filesystem;
using tweezer::Json;
using tweezer::io::CsvWriter;

namespace {

constexpr const char* tool_version = "1.0.0";
constexpr const char* out_env = "TWEEZER_OUT";

struct Options {
  std::string config_path;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  // switch shortcuts
  std::optional<int> p;
  std::optional<double> epsilon, nu0;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json diagnostics_json(const std::vector<tweezer::Diagnostic>& d) {
  Json a = Json::array();
  for (const auto& x : d) a.push_back({{"level", x.level}, {"path", x.path}, {"message", x.message}});
  return a;
}

int report_error(int code, const std::string& kind, const std::string& message,
                 const std::vector<tweezer::Diagnostic>& diags = {}) {
  Json e = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  if (!diags.empty()) e["error"]["diagnostics"] = diagnostics_json(diags);
  std::cerr << e.dump() << '\n';
  return code;
}

Json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json gate_report(const tweezer::GateReport& r) {
  return {{"gates", r.gates},
          {"n_th", r.n_th},
          {"deltaF", r.deltaF},
          {"deltaF_reported", 2.0 * r.deltaF},
          {"crosstalk", r.crosstalk},
          {"crosstalk_tail", r.crosstalk_tail},
          {"delta_chi", r.delta_chi}};
}

/// Output directory bookkeeping.
class Run {
 public:
  explicit Run(fs::path dir) : dir_(std::move(dir)) {}

  std::string path(const std::string& name) {
    files_.push_back(name);
    return (dir_ / name).string();
  }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

fs::path resolve_out(const Options& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(out_env); env && *env) return fs::path(env) / command;
  return fs::path("tweezer-runs") / command;
}

void prepare_out(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec)) {
    if (!force)
      throw IoError("output directory '" + dir.string() + "' is not empty; pass --force to overwrite");
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// Scenarios

Json write_bands(Run& run, const tweezer::CellConfig& cell, int k_points) {
  const tweezer::BandStructure b = tweezer::band_structure(cell, k_points);
  CsvWriter csv(run.path("bands.csv"), "phonon band structure of the pinned lattice", {"k", "band", "nu"});
  for (int kk = 0; kk < b.grid_size(); ++kk)
    for (int n = 0; n < b.p; ++n) csv.row({b.k[kk], static_cast<long long>(n), b.freqs(kk, n)});
  Json bands = Json::array();
  for (int n = 0; n < b.p; ++n)
    bands.push_back({{"band", n}, {"mean", b.band_mean(n)}, {"width", b.band_width(n)},
                     {"min", b.freqs.col(n).minCoeff()}, {"max", b.freqs.col(n).maxCoeff()}});
  Json r = {{"p", cell.p}, {"epsilon", cell.epsilon}, {"nu0", cell.nu0}, {"direction", tweezer::to_string(cell.direction)},
            {"k_points", k_points}, {"bands", bands}};
  if (cell.direction == tweezer::Direction::x) {
    const auto [com, stretch] = tweezer::flat_band_frequencies(cell.epsilon, cell.nu0);
    const auto w = tweezer::perturbative_bandwidths(cell);
    r["flat_band"] = {{"com", com}, {"stretch", stretch}};
    r["perturbative_width"] = {{"com", w.com}, {"stretch", w.stretch}};
    r["insufficient_pinning"] = tweezer::insufficient_pinning(b);
  }
  return r;
}

Json cmd_modes(Run& run, const tweezer::RunConfig& c) {
  if (c.system.kind == tweezer::SystemKind::infinite) {
    tweezer::CellConfig cell = c.system.cell;
    cell.direction = c.direction;
    return write_bands(run, cell, c.k_points);
  }
  const tweezer::FiniteSetup s = tweezer::build_finite(c.system.finite);
  const tweezer::PhononModes pm = tweezer::normal_modes(s.chain, s.tweezers, c.direction);
  const int n = s.chain.size();
  {
    CsvWriter csv(run.path("positions.csv"), "equilibrium positions and pinning pattern", {"ion", "z", "nu0", "buffer"});
    for (int i = 0; i < n; ++i)
      csv.row({static_cast<long long>(i), s.chain.positions[i], s.tweezers.nu0[i],
               static_cast<long long>(s.chain.is_buffer(i))});
  }
  {
    std::vector<std::string> cols{"mode", "nu"};
    for (int i = 0; i < n; ++i) cols.push_back("ion_" + std::to_string(i));
    CsvWriter csv(run.path("mode_matrix.csv"), "normal-mode amplitude heatmap (row mode, column ion)", cols);
    for (int m = 0; m < pm.freqs.size(); ++m) {
      std::vector<tweezer::io::Cell> row{static_cast<long long>(m), pm.freqs[m]};
      for (int i = 0; i < n; ++i) row.emplace_back(pm.mode_matrix(i, m));
      csv.row(row);
    }
  }
  const tweezer::SpacingReport sp = tweezer::spacing_report(s.chain);
  Json pairs = Json::array();
  for (const auto& [a, b] : s.pinned) {
    const tweezer::LocalizedPair lp = tweezer::find_localized_pair_modes(pm, a, b, 0.0);
    const tweezer::PairFrequencies rf = tweezer::local_pair_frequencies(pm, a, b);
    pairs.push_back({{"first", a}, {"second", b}, {"com_mode", lp.com}, {"stretch_mode", lp.stretch},
                     {"nu_com", pm.freqs[lp.com]}, {"nu_stretch", pm.freqs[lp.stretch]},
                     {"com_overlap", lp.com_overlap}, {"stretch_overlap", lp.stretch_overlap},
                     {"rayleigh_com", rf.com}, {"rayleigh_stretch", rf.stretch}});
  }
  return {{"n_ions", n},
          {"direction", tweezer::to_string(c.direction)},
          {"gamma_z", s.chain.config.gamma_z},
          {"epsilon", s.chain.epsilon},
          {"mean_spacing", s.chain.mean_spacing},
          {"spacing_relative_std", sp.relative_std},
          {"spacing_warning", sp.warn},
          {"force_residual", s.chain.force_residual},
          {"frequencies", vec(pm.freqs)},
          {"pinned_pairs", pairs}};
}

Json cmd_bands(Run& run, const tweezer::RunConfig& c) {
  tweezer::CellConfig cell = c.system.cell;
  cell.direction = c.direction;
  return write_bands(run, cell, c.k_points);
}

Json finite_design_json(Run& run, const tweezer::FiniteDesign& d, const std::string& prefix) {
  CsvWriter csv(run.path(prefix + "pairs.csv"), "per-pair gate parameters along the chain",
                {"pair", "first", "second", "nu_com", "nu_stretch", "mu", "rabi", "tau", "chi", "deltaF_pair"});
  double tau_max = 0.0;
  Json pairs = Json::array();
  for (std::size_t g = 0; g < d.pairs.size(); ++g) {
    const auto& p = d.pairs[g];
    const double chi = d.report.chi(p.first, p.second);
    csv.row({static_cast<long long>(g), static_cast<long long>(p.first), static_cast<long long>(p.second), p.nu_com,
             p.nu_stretch, p.mu, p.rabi, p.tau, chi, p.deltaF_pair});
    tau_max = std::max(tau_max, p.tau);
    pairs.push_back({{"first", p.first}, {"second", p.second}, {"mu", p.mu}, {"rabi", p.rabi}, {"tau", p.tau},
                     {"deltaF_pair", p.deltaF_pair}, {"com_overlap", p.com_overlap},
                     {"stretch_overlap", p.stretch_overlap}});
  }
  CsvWriter ions(run.path(prefix + "ion_alpha.csv"), "residual phonon displacement per ion",
                 {"ion", "alpha_sq"});
  for (int i = 0; i < d.report.alpha_sq.rows(); ++i)
    ions.row({static_cast<long long>(i), d.report.alpha_sq.row(i).sum()});
  return {{"report", gate_report(d.report)}, {"tau_max", tau_max}, {"pairs", pairs}};
}

Json cmd_design(Run& run, const tweezer::RunConfig& c) {
  if (c.system.kind == tweezer::SystemKind::finite) {
    const tweezer::FiniteSetup s = tweezer::build_finite(c.system.finite);
    const tweezer::FiniteDesign d = tweezer::design_finite(s.chain, s.tweezers, s.pinned, c.design);
    return finite_design_json(run, d, "");
  }
  const tweezer::InfiniteDesign d = tweezer::design_infinite(c.system.cell, c.design);
  {
    CsvWriter csv(run.path("detuning_scan.csv"), "gate infidelity versus detuning", {"mu", "deltaF"});
    for (const auto& [mu, f] : d.scan) csv.row({mu, f});
  }
  {
    const tweezer::BandStructure bands = tweezer::band_structure(c.system.cell, c.design.k_points);
    const auto gs = tweezer::band_segment_gs(bands, d.mu, d.tau, 1);
    CsvWriter csv(run.path("alpha_profile.csv"), "k-resolved residual phonon displacement",
                  {"k", "band", "slot", "alpha_sq"});
    for (int slot : c.system.cell.pinned_slots) {
      const Eigen::MatrixXd prof =
          tweezer::band_alpha_profile(bands, slot, gs, Eigen::VectorXd::Constant(1, d.rabi));
      for (int kk = 0; kk < bands.grid_size(); ++kk)
        for (int n = 0; n < bands.p; ++n)
          csv.row({bands.k[kk], static_cast<long long>(n), static_cast<long long>(slot), prof(kk, n)});
    }
  }
  {
    CsvWriter csv(run.path("crosstalk_distance.csv"), "crosstalk versus cell distance", {"cells", "crosstalk"});
    for (std::size_t k = 0; k < d.result.crosstalk_by_distance.size(); ++k)
      csv.row({static_cast<long long>(k), d.result.crosstalk_by_distance[k]});
  }
  return {{"nu_com", d.nu_com},         {"nu_stretch", d.nu_stretch}, {"width_com", d.width_com},
          {"width_stretch", d.width_stretch}, {"tau", d.tau},         {"mu_seed", d.mu_seed},
          {"mu", d.mu},                 {"rabi", d.rabi},             {"chi_sign", d.chi_sign},
          {"report", gate_report(d.result.report)}};
}

Json cmd_sweep(Run& run, const tweezer::RunConfig& c, unsigned threads) {
  const tweezer::SweepResult s =
      tweezer::sweep_performance(c.sweep.p, c.sweep.epsilons, c.sweep.nu0s, c.design, c.sweep.level, threads);
  CsvWriter csv(run.path("sweep.csv"), "infidelity, crosstalk and gate time over pinning strength and spacing",
                {"nu0", "epsilon", "deltaF", "deltaF_reported", "crosstalk", "tau", "mu", "insufficient_pinning",
                 "failed"});
  int failed = 0;
  for (const auto& pt : s.points) {
    csv.row({pt.nu0, pt.epsilon, pt.deltaF, 2.0 * pt.deltaF, pt.crosstalk, pt.tau, pt.mu,
             static_cast<long long>(pt.insufficient_pinning), static_cast<long long>(pt.failed)});
    failed += pt.failed;
  }
  CsvWriter con(run.path("contour.csv"), "gate time and crosstalk along the fixed-infidelity contour",
                {"nu0", "epsilon", "tau", "crosstalk"});
  double tau_lo = 0, tau_hi = 0;
  for (const auto& cp : s.contour) {
    con.row({cp.nu0, cp.epsilon, cp.tau, cp.crosstalk});
    tau_lo = tau_lo == 0 ? cp.tau : std::min(tau_lo, cp.tau);
    tau_hi = std::max(tau_hi, cp.tau);
  }
  return {{"p", s.p},
          {"level", c.sweep.level},
          {"points", s.points.size()},
          {"failed_points", failed},
          {"contour_points", s.contour.size()},
          {"tau_slope", s.contour.size() >= 2 ? Json(s.slope) : Json(nullptr)},
          {"tau_range", {tau_lo, tau_hi}}};
}

void write_sequences(CsvWriter& time, CsvWriter& sine, const std::string& label, long long index,
                     const Eigen::VectorXd& r, double duration) {
  const int S = static_cast<int>(r.size());
  const Eigen::VectorXd t = tweezer::sine_transform(r);
  for (int s = 0; s < S; ++s) {
    time.row({label, index, static_cast<long long>(s), duration * s / S, duration * (s + 1) / S, r[s]});
    sine.row({label, index, static_cast<long long>(s + 1), t[s]});
  }
}

Json cmd_optimize(Run& run, const tweezer::RunConfig& c, unsigned threads) {
  const tweezer::OptimizeSpec& o = c.optimize;
  CsvWriter time(run.path("sequences.csv"), "optimal segmented pulse sequences in the time domain",
                 {"set", "index", "segment", "t_start", "t_end", "rabi"});
  CsvWriter sine(run.path("sequences_sine.csv"), "optimal pulse sequences in the sine-transform domain",
                 {"set", "index", "component", "value"});
  if (c.system.kind == tweezer::SystemKind::infinite) {
    const tweezer::InfiniteOptimization r = tweezer::optimize_infinite(c.system.cell, o, threads);
    CsvWriter curve(run.path("cost_curve.csv"), "optimal cost versus detuning",
                    {"set", "mu", "cost", "cost_alpha", "cost_chi"});
    Json sets = Json::array();
    const char* names[2] = {"pinned", "unpinned"};
    for (int k = 0; k < 2; ++k) {
      const tweezer::SetResult& sr = r.sets[k];
      for (const auto& pt : sr.curve) curve.row({names[k], pt.mu, pt.cost, pt.cost_alpha, pt.cost_chi});
      Json odd = Json::array();
      for (std::size_t g = 0; g < sr.best.sequences.size(); ++g) {
        write_sequences(time, sine, names[k], static_cast<long long>(g), sr.best.sequences[g], o.duration);
        odd.push_back(tweezer::odd_fraction(sr.best.sequences[g]));
      }
      sets.push_back({{"set", names[k]}, {"slots", sr.slots}, {"mu", sr.best.mu}, {"mu_window", {sr.mu_lo, sr.mu_hi}},
                      {"cost", sr.best.cost}, {"cost_alpha", sr.best.cost_alpha}, {"cost_chi", sr.best.cost_chi},
                      {"gradient_norm", sr.best.gradient_norm}, {"best_effort", sr.best_effort},
                      {"odd_fraction", odd}});
    }
    CsvWriter dist(run.path("crosstalk_distance.csv"), "crosstalk versus cell distance", {"cells", "crosstalk"});
    for (std::size_t k = 0; k < r.result.crosstalk_by_distance.size(); ++k)
      dist.row({static_cast<long long>(k), r.result.crosstalk_by_distance[k]});
    return {{"report", gate_report(r.result.report)}, {"max_rabi", r.max_rabi}, {"sets", sets}};
  }
  const tweezer::FiniteSetup s = tweezer::build_finite(c.system.finite);
  const tweezer::FiniteOptimization r = tweezer::optimize_finite(s.chain, s.tweezers, s.gates, o, threads);
  CsvWriter pairs(run.path("pairs.csv"), "per-pair optimized detuning and infidelity",
                  {"pair", "first", "second", "mu", "deltaF_pair", "best_deltaF", "candidates", "max_rabi", "chi"});
  for (std::size_t p = 0; p < r.pairs.size(); ++p) {
    const auto& pc = r.pairs[p];
    const auto& pulse = pc.grid[r.choice[p]];
    pairs.row({static_cast<long long>(p), static_cast<long long>(pc.first), static_cast<long long>(pc.second),
               pulse.mu, pulse.deltaF, pc.grid[pc.best].deltaF, static_cast<long long>(pc.candidates.size()),
               pulse.amplitude.cwiseAbs().maxCoeff(), r.report.chi(pc.first, pc.second)});
    write_sequences(time, sine, "pair", static_cast<long long>(p), pulse.amplitude, o.duration);
  }
  return {{"report", gate_report(r.report)},
          {"max_rabi", r.max_rabi},
          {"gates", r.pairs.size()},
          {"crosstalk_history", r.crosstalk_history}};
}

Json cmd_misadjust(Run& run, const tweezer::RunConfig& c, unsigned threads) {
  const tweezer::FiniteSetup s = tweezer::build_finite(c.system.finite);
  const tweezer::FiniteDesign d = tweezer::design_finite(s.chain, s.tweezers, s.pinned, c.design);
  CsvWriter csv(run.path("misadjust.csv"), "gate infidelity and over/underrotation versus tweezer misadjustment",
                {"sigma", "channel", "mean_deltaF", "se_deltaF", "mean_delta_chi", "se_delta_chi", "excluded"});
  CsvWriter real(run.path("realizations.csv"), "individual misadjustment realizations",
                 {"sigma", "channel", "realization", "deltaF", "delta_chi", "stable"});
  const double eps = c.system.finite.epsilon;
  const double l0_nm = c.misadjust.spacing_um * 1e3 * std::pow(eps, 2.0 / 3.0);
  Json rows = Json::array();
  for (tweezer::Channel ch : c.misadjust.channels) {
    for (double sigma : c.misadjust.sigmas) {
      tweezer::MisadjustSpec spec = c.misadjust.spec;
      spec.sigma = sigma;
      spec.channel = ch;
      const tweezer::MonteCarloResult mc =
          tweezer::misadjust_mc(s.chain, s.tweezers, d.schedule, d.layer, spec, c.design.n_th, threads);
      csv.row({sigma, tweezer::to_string(ch), mc.mean_deltaF, mc.se_deltaF, mc.mean_delta_chi, mc.se_delta_chi,
               static_cast<long long>(mc.excluded)});
      for (const auto& rz : mc.realizations)
        real.row({sigma, tweezer::to_string(ch), static_cast<long long>(rz.index), rz.deltaF, rz.delta_chi,
                  static_cast<long long>(rz.stable)});
      const double dw = sigma / spec.intensity_scale;
      rows.push_back({{"sigma", sigma},
                      {"channel", tweezer::to_string(ch)},
                      {"mean_deltaF", mc.mean_deltaF},
                      {"mean_deltaF_reported", 2.0 * mc.mean_deltaF},
                      {"se_deltaF", mc.se_deltaF},
                      {"mean_delta_chi", mc.mean_delta_chi},
                      {"se_delta_chi", mc.se_delta_chi},
                      {"excluded", mc.excluded},
                      {"physical",
                       {{"focus_nm", sigma * l0_nm},
                        {"tilt_deg", sigma * 180.0 / std::numbers::pi},
                        {"pinning_shift_khz", dw * c.system.finite.nu0 * c.misadjust.omega_x_mhz * 1e3},
                        {"relative_intensity", 2.0 * dw}}}});
    }
  }
  return {{"nominal", gate_report(d.report)},
          {"physical_units", {{"spacing_um", c.misadjust.spacing_um}, {"omega_x_mhz", c.misadjust.omega_x_mhz},
                              {"l0_nm", l0_nm}}},
          {"results", rows}};
}

Json cmd_switch(Run& run, const tweezer::RunConfig& c) {
  const tweezer::SwitchResult r = tweezer::switching_prefactor(c.switching.spec);
  CsvWriter csv(run.path("switch.csv"), "phonon excitation probability versus switching time",
                {"tau_s", "probability"});
  for (double t : c.switching.times) csv.row({t, tweezer::switching_probability(r, t)});
  return {{"p", c.switching.spec.p},
          {"epsilon", c.switching.spec.epsilon},
          {"nu0", c.switching.spec.nu0},
          {"prefactor", r.prefactor},
          {"sqrt_prefactor", r.threshold},
          {"prefactor_x", r.k_x},
          {"prefactor_z", r.k_z},
          {"max_w_antisymmetry", r.max_w_antisymmetry}};
}

fs::path resolve_data(const std::string& file, const fs::path& config_dir) {
  const fs::path p(file);
  if (p.is_absolute()) return p;
  for (const fs::path& base : {config_dir, fs::current_path(), fs::path(TWEEZER_SOURCE_DIR)}) {
    std::error_code ec;
    if (fs::exists(base / p, ec)) return base / p;
  }
  return p;
}

Json cmd_feasibility(Run& run, const tweezer::RunConfig& c, const fs::path& config_dir) {
  const tweezer::FeasibilityConfig& f = c.feasibility;
  const auto all = tweezer::load_species(resolve_data(f.species_file, config_dir).string());
  std::vector<tweezer::SpeciesData> chosen;
  for (const auto& s : all)
    if (f.species.empty() || std::find(f.species.begin(), f.species.end(), s.name) != f.species.end())
      chosen.push_back(s);
  for (const auto& name : f.species) {
    bool found = false;
    for (const auto& s : all) found = found || s.name == name;
    if (!found) throw tweezer::ConfigError("species '" + name + "' not in " + f.species_file);
  }
  CsvWriter table(run.path("feasibility.csv"), "tweezer power and scattering infidelity per species",
                  {"species", "wavelength_nm", "waist_um", "power_mw", "deltaF_sc", "spacing_um"});
  Json rows = Json::array();
  for (const auto& s : chosen) {
    const tweezer::FeasibilityRow r =
        tweezer::feasibility_row(s, s.tweezer_wavelength_nm, f.nu0, f.epsilon, f.optics);
    table.row({r.species, r.wavelength_nm, r.waist_m * 1e6, r.power_w * 1e3, r.deltaF_sc, r.spacing_m * 1e6});
    rows.push_back({{"species", r.species}, {"wavelength_nm", r.wavelength_nm}, {"waist_um", r.waist_m * 1e6},
                    {"power_mw", r.power_w * 1e3}, {"deltaF_sc", r.deltaF_sc}, {"spacing_um", r.spacing_m * 1e6},
                    {"epsilon_check", tweezer::epsilon_physical(r.spacing_m, s.mass_amu, f.optics.omega_x)}});
  }
  Json out = {{"nu0", f.nu0},
              {"epsilon", f.epsilon},
              {"gate_time_us", tweezer::flat_band_gate_time(f.epsilon, f.nu0, f.optics.omega_x) * 1e6},
              {"species", rows}};
  if (f.scan_hi_nm > f.scan_lo_nm) {
    CsvWriter scan(run.path("wavelength_scan.csv"), "scattering infidelity and power versus tweezer wavelength",
                   {"species", "wavelength_nm", "power_mw", "deltaF_sc"});
    for (const auto& s : chosen)
      for (const auto& pt : tweezer::wavelength_scan(s, f.scan_lo_nm, f.scan_hi_nm, f.scan_points, f.nu0, f.epsilon,
                                                     f.optics))
        scan.row({s.name, pt.wavelength_nm, pt.power_w * 1e3, pt.deltaF_sc});
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

Json versions() {
  return {{"tweezer", tool_version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"gsl", GSL_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"compiler", __VERSION__}};
}

int run_command(const std::string& command, const Options& o) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  tweezer::RunConfig c;
  std::vector<tweezer::Diagnostic> warnings;
  fs::path config_dir = fs::current_path();
  if (!o.config_path.empty()) {
    Json j = tweezer::read_json_file(o.config_path);
    config_dir = fs::absolute(o.config_path).parent_path();
    if (j.is_object() && j.contains("command") && j["command"] != command)
      throw tweezer::ConfigError("config is for command '" + j["command"].dump() + "', not '" + command + "'");
    if (j.is_object() && o.seed) j["seed"] = *o.seed;
    c = tweezer::parse_config(j, &warnings);
  } else if (command == "switch") {
    c.command = command;
  } else {
    throw tweezer::ConfigError("--config is required for " + command);
  }
  if (command == "switch") {
    if (o.p) c.switching.spec.p = *o.p;
    if (o.epsilon) c.switching.spec.epsilon = *o.epsilon;
    if (o.nu0) c.switching.spec.nu0 = *o.nu0;
    c.switching.spec.validate();
  }
  if (o.seed) {
    c.seed = *o.seed;
    c.optimize.seed = *o.seed;
    c.misadjust.spec.seed = *o.seed;
  }
  tweezer::default_threads() = o.threads;

  const fs::path dir = resolve_out(o, command);
  prepare_out(dir, o.force);
  Run run(dir);
  const auto t1 = clock::now();

  Json result;
  if (command == "modes") result = cmd_modes(run, c);
  else if (command == "bands") result = cmd_bands(run, c);
  else if (command == "design") result = cmd_design(run, c);
  else if (command == "sweep") result = cmd_sweep(run, c, o.threads);
  else if (command == "optimize") result = cmd_optimize(run, c, o.threads);
  else if (command == "misadjust") result = cmd_misadjust(run, c, o.threads);
  else if (command == "switch") result = cmd_switch(run, c);
  else if (command == "feasibility") result = cmd_feasibility(run, c, config_dir);
  const auto t2 = clock::now();

  const Json doc = {{"command", command}, {"seed", c.seed}, {"warnings", diagnostics_json(warnings)},
                    {"result", result}};
  {
    std::ofstream out(run.path("result.json"), std::ios::binary);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("cannot write result.json");
  }
  const auto t3 = clock::now();
  auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  Json files = run.files();
  files.push_back("manifest.json");
  const Json manifest = {{"tool", "tweezer"},
                         {"command", command},
                         {"config_path", o.config_path.empty() ? Json(nullptr) : Json(fs::absolute(o.config_path).string())},
                         {"config", tweezer::to_json(c)},
                         {"seed", c.seed},
                         {"threads", o.threads},
                         {"versions", versions()},
                         {"started_utc", utc_now()},
                         {"timings_s", {{"setup", secs(t0, t1)}, {"compute", secs(t1, t2)}, {"write", secs(t2, t3)},
                                        {"total", secs(t0, t3)}}},
                         {"outputs", files}};
  {
    std::ofstream out((dir / "manifest.json").string(), std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write manifest.json");
  }
  std::cout << Json({{"status", "ok"}, {"command", command}, {"output", dir.string()},
                     {"warnings", warnings.size()}}).dump()
            << '\n';
  return 0;
}

int run_validate(const std::string& path) {
  const std::vector<tweezer::Diagnostic> d = tweezer::validate_config(path);
  bool errors = false;
  for (const auto& x : d) errors = errors || x.level == "error";
  std::cout << Json({{"config", path}, {"valid", !errors}, {"diagnostics", diagnostics_json(d)}}).dump(2) << '\n';
  return errors ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tweezer-engineered phonon modes and parallel Molmer-Sorensen gates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);
  Options o;
  std::string validate_path;

  auto* validate = app.add_subcommand("validate", "check a configuration file and print diagnostics");
  validate->add_option("config", validate_path, "configuration file")->required();

  const std::vector<std::pair<std::string, std::string>> scenarios{
      {"modes", "equilibrium and normal modes of a pinned chain (Bloch bands for infinite chains)"},
      {"bands", "phonon bands of an infinite pinned lattice"},
      {"design", "minimal-control gate design and its error budget"},
      {"sweep", "design performance over a grid of spacings and pinning strengths"},
      {"optimize", "segmented-pulse optimization of a dense gate layer"},
      {"misadjust", "Monte Carlo over tweezer misadjustments"},
      {"switch", "phonon excitation when moving the tweezers between ion pairs"},
      {"feasibility", "tweezer power and photon-scattering budget per species"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : scenarios) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", o.config_path, "configuration file (JSON)");
    sub->add_option("-o,--out", o.out, std::string("output directory (default $") + out_env + "/<command>)");
    sub->add_flag("-f,--force", o.force, "overwrite a non-empty output directory");
    sub->add_option("--seed", o.seed, "override the configuration seed");
    sub->add_option("-j,--threads", o.threads, "worker threads")->check(CLI::Range(1u, 1024u));
    if (name == "switch") {
      sub->add_option("--p", o.p, "cell size");
      sub->add_option("--epsilon", o.epsilon, "spacing parameter");
      sub->add_option("--nu0", o.nu0, "pinning frequency / omega_x");
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(1, "usage", e.what());
  }

  try {
    if (*validate) return run_validate(validate_path);
    for (auto* sub : subs)
      if (*sub) return run_command(sub->get_name(), o);
  } catch (const tweezer::SchemaError& e) {
    return report_error(1, "config", e.what(), e.diagnostics);
  } catch (const tweezer::ConfigError& e) {
    return report_error(1, "config", e.what());
  } catch (const IoError& e) {
    return report_error(1, "io", e.what());
  } catch (const tweezer::NumericError& e) {
    return report_error(2, "numeric", e.what());
  } catch (const std::exception& e) {
    return report_error(2, "internal", e.what());
  }
  return 0;
}
