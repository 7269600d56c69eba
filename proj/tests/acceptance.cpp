// Acceptance report: one PASS/FAIL line per criterion, then detail lines.
// Always exits 0; the verdicts are the output. Pass criterion numbers as
// arguments to run a subset.
//
// Infidelities compared against published numbers use the printed
// convention, twice the (4/5G) sum |alpha|^2 (2 n_th + 1) of the library.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "support/oracles.hpp"
#include "tweezer/config.hpp"
#include "tweezer/design.hpp"
#include "tweezer/feasibility.hpp"
#include "tweezer/fock_oracle.hpp"
#include "tweezer/optimize.hpp"
#include "tweezer/robustness.hpp"

namespace {

using namespace tweezer;

constexpr double printed = 2.0;

struct Verdict {
  bool pass = true;
  std::vector<std::string> lines;

  // Records one sub-check and folds it into the verdict.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "MISS ") + what);
  }
  void note(const std::string& s) { lines.push_back("     " + s); }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

bool within_rel(double v, double ref, double tol) { return std::abs(v - ref) <= tol * std::abs(ref); }

std::string rel(const std::string& name, double v, double ref, double tol) {
  return name + " = " + fmt(v) + " (target " + fmt(ref) + " +-" + fmt(100 * tol, 3) + "%)";
}

void check_rel(Verdict& v, const std::string& name, double value, double ref, double tol) {
  v.check(within_rel(value, ref, tol), rel(name, value, ref, tol));
}

void check_abs(Verdict& v, const std::string& name, double value, double ref, double tol) {
  v.check(std::abs(value - ref) <= tol, name + " = " + fmt(value, 6) + " (target " + fmt(ref, 6) + " +-" + fmt(tol) + ")");
}

void check_max(Verdict& v, const std::string& name, double value, double bound) {
  v.check(value <= bound, name + " = " + fmt(value) + " (bound " + fmt(bound) + ")");
}

struct FiniteP6 {
  IonChain chain;
  TweezerArray tw;
  FiniteDesign design;
  double tau_max = 0.0;
};

FiniteP6 finite_p6(double nu0_alt) {
  FiniteP6 f;
  f.chain = solve_equilibrium(calibrate_gamma_for_epsilon(130, 15, 0.07));
  f.tw = TweezerArray{periodic_pinning(130, 6, 15, 17, 0.4, nu0_alt), std::nullopt};
  f.design = design_finite(f.chain, f.tw, periodic_pairs(15, 6, 17), DesignSpec{});
  for (const auto& p : f.design.pairs) f.tau_max = std::max(f.tau_max, p.tau);
  return f;
}

// 1. Infinite chain, stretch gate.
Verdict infinite_stretch() {
  Verdict v;
  DesignSpec s;
  s.mode = ModeChoice::stretch;
  const InfiniteDesign d = design_infinite(CellConfig{}, s);
  const GateReport& r = d.result.report;
  check_rel(v, "deltaF", printed * r.deltaF, 5.7e-4, 0.20);
  check_rel(v, "C", r.crosstalk, 4.1e-2, 0.20);
  check_abs(v, "mu", d.mu, 1.065, 0.005);
  check_rel(v, "tau", d.tau, 1.37e3, 0.02);
  check_rel(v, "R", d.rabi, 4.75e-3, 0.05);
  return v;
}

// 2. Infinite chain, COM gate.
Verdict infinite_com() {
  Verdict v;
  DesignSpec s;
  s.mode = ModeChoice::com;
  const InfiniteDesign d = design_infinite(CellConfig{}, s);
  const GateReport& r = d.result.report;
  check_rel(v, "deltaF", printed * r.deltaF, 2.1e-3, 0.20);
  check_rel(v, "C", r.crosstalk, 0.17, 0.20);
  check_abs(v, "mu", d.mu, 1.079, 0.005);
  return v;
}

// 3. Larger unit cells suppress crosstalk.
Verdict crosstalk_suppression() {
  Verdict v;
  for (int p : {9, 10, 12}) {
    CellConfig cell;
    cell.p = p;
    const InfiniteDesign d = design_infinite(cell, DesignSpec{});
    v.check(d.result.report.crosstalk < 1e-2, "p = " + std::to_string(p) + ": C = " + fmt(d.result.report.crosstalk) +
                                                   " (bound 1e-2), deltaF = " +
                                                   fmt(printed * d.result.report.deltaF));
  }
  return v;
}

// 4. Gate time along the deltaF = 1e-3 contour.
Verdict sweep_scaling() {
  Verdict v;
  std::vector<double> eps, nu0s;
  for (int k = 0; k <= 40; ++k) eps.push_back(0.01 * std::pow(25.0, k / 40.0));
  for (int k = 0; k <= 6; ++k) nu0s.push_back(0.1 + 0.05 * k);
  DesignSpec s;
  s.k_points = 100;
  s.crosstalk_cells = 20;
  const SweepResult r = sweep_performance(6, eps, nu0s, s, 1e-3 / printed);
  v.check(r.contour.size() == nu0s.size(),
          "contour found at " + std::to_string(r.contour.size()) + " of " + std::to_string(nu0s.size()) + " nu0 values");
  check_abs(v, "log-log slope of tau vs nu0", r.slope, -2.0, 0.2);
  if (!r.contour.empty()) {
    double lo = 1e300, hi = 0;
    for (const auto& c : r.contour) {
      lo = std::min(lo, c.tau);
      hi = std::max(hi, c.tau);
      v.note("nu0 = " + fmt(c.nu0) + ": epsilon = " + fmt(c.epsilon) + ", tau = " + fmt(c.tau) + ", C = " +
             fmt(c.crosstalk));
    }
    // "Spans 0.05e4 to 1e4": the ends fall within a factor of two of those values.
    v.check(lo >= 250 && lo <= 1000 && hi >= 5e3 && hi <= 2e4,
            "tau range [" + fmt(lo) + ", " + fmt(hi) + "] (expected ~[500, 1e4] within 2x)");
  }
  return v;
}

// 5. Finite chain, uniform and alternating pinning.
Verdict finite_chain() {
  Verdict v;
  const FiniteP6 u = finite_p6(0.4);
  check_rel(v, "uniform deltaF", printed * u.design.report.deltaF, 9e-4, 0.25);
  check_rel(v, "uniform C", u.design.report.crosstalk, 2.8e-2, 0.25);
  check_rel(v, "max tau", u.tau_max, 2670, 0.03);
  const FiniteP6 a = finite_p6(0.36);
  check_rel(v, "alternating deltaF", printed * a.design.report.deltaF, 1.7e-3, 0.25);
  check_rel(v, "alternating C", a.design.report.crosstalk, 6.5e-3, 0.25);
  return v;
}

// 6. Optimized dense layer on the infinite chain.
Verdict optimized_infinite() {
  Verdict v;
  CellConfig cell;
  cell.p = 4;
  OptimizeSpec s;
  s.segments = 8;
  s.groups = 4;
  s.duration = 1500;
  s.mu_points = 40;
  s.restarts = 4;
  const InfiniteOptimization r = optimize_infinite(cell, s);
  const GateReport& g = r.result.report;
  check_max(v, "deltaF", printed * g.deltaF, 5e-4);
  check_max(v, "C", g.crosstalk, 5e-3);
  check_max(v, "delta_chi", g.delta_chi, 1e-5);
  for (const auto& set : r.sets) {
    std::string fr;
    bool alternates = true;
    for (std::size_t k = 0; k < set.best.sequences.size(); ++k) {
      const double f = odd_fraction(set.best.sequences[k]);
      fr += (k ? ", " : "") + fmt(f, 3);
      if (k > 0) {
        const double prev = odd_fraction(set.best.sequences[k - 1]);
        alternates = alternates && ((prev > 0.9 && f < 0.1) || (prev < 0.1 && f > 0.9));
      }
    }
    v.check(alternates, "slots {" + std::to_string(set.slots[0]) + "," + std::to_string(set.slots[1]) +
                            "} odd sine fractions alternate: " + fr);
  }
  v.note("max R = " + fmt(r.max_rabi));
  return v;
}

// 7. Optimized dense layer on a 130-ion chain.
Verdict optimized_finite() {
  Verdict v;
  const IonChain chain = solve_equilibrium(calibrate_gamma_for_epsilon(130, 15, 0.07));
  const TweezerArray tw{periodic_pinning(130, 4, 15, 25, 0.4, 0.4), std::nullopt};
  OptimizeSpec s;
  s.segments = 8;
  s.duration = 1500;
  s.mu_points = 100;
  s.pair_window_margin = 3;
  s.candidate_cap = 0;
  s.crosstalk_neighbors = 4;
  const auto pairs = dense_pairs(chain);
  v.check(pairs.size() == 50, std::to_string(pairs.size()) + " gates");
  const FiniteOptimization r = optimize_finite(chain, tw, pairs, s);
  check_max(v, "deltaF", printed * r.report.deltaF, 1e-4);
  check_max(v, "C", r.report.crosstalk, 1e-3);
  check_max(v, "max R", r.max_rabi, 0.008);
  v.note("delta_chi = " + fmt(r.report.delta_chi));
  return v;
}

// 8. Strong-pinning band widths.
Verdict band_widths() {
  Verdict v;
  CellConfig cell;
  const BandStructure b = band_structure(cell, 400);
  const BandWidths w = perturbative_bandwidths(cell);
  check_rel(v, "COM width / perturbative", b.band_width(0) / w.com, 1.0, 0.10);
  check_rel(v, "stretch width / perturbative", b.band_width(1) / w.stretch, 1.0, 0.10);
  const BandWidths blk = pinned_block_bandwidths(cell);
  v.note("pinned-block widths / perturbative: COM " + fmt(blk.com / w.com) + ", stretch " +
         fmt(blk.stretch / w.stretch) + " (spectator couplings dropped)");
  std::vector<double> ps, wc, ws;
  for (int p : {6, 8, 10, 12}) {
    CellConfig c;
    c.p = p;
    const BandStructure bp = band_structure(c, 400);
    ps.push_back(p);
    wc.push_back(bp.band_width(0));
    ws.push_back(bp.band_width(1));
  }
  check_abs(v, "COM width exponent", loglog_slope(ps, wc), -3.0, 0.3);
  check_abs(v, "stretch width exponent", loglog_slope(ps, ws), -5.0, 0.3);
  return v;
}

// 9. Adiabatic switching prefactor.
Verdict switching() {
  Verdict v;
  const SwitchResult r4 = switching_prefactor(SwitchSpec{4, 0.07, 0.4, 200});
  const SwitchResult r6 = switching_prefactor(SwitchSpec{6, 0.07, 0.4, 200});
  check_abs(v, "sqrt K (p = 4)", r4.threshold, 8.0, 1.0);
  check_abs(v, "sqrt K (p = 6)", r6.threshold, 11.0, 1.0);
  bool exact = true;
  for (double t : {10.0, 100.0, 1000.0})
    exact = exact && std::abs(switching_probability(r4, t) * t * t - r4.prefactor) <= 1e-14 * r4.prefactor;
  v.check(exact, "P tau_s^2 constant to 1e-14");
  v.check(r4.max_w_antisymmetry < 1e-12 && r6.max_w_antisymmetry < 1e-12,
          "W antisymmetry residual " + fmt(std::max(r4.max_w_antisymmetry, r6.max_w_antisymmetry)));
  return v;
}

// 10. Misadjustment Monte Carlo on the uniform p = 6 layer.
Verdict misadjustment() {
  Verdict v;
  const FiniteP6 f = finite_p6(0.4);
  auto run = [&](Channel c, double sigma) {
    MisadjustSpec s;
    s.sigma = sigma;
    s.channel = c;
    s.realizations = 40;
    s.seed = 2024;
    return misadjust_mc(f.chain, f.tw, f.design.schedule, f.design.layer, s);
  };
  for (Channel c : {Channel::focus, Channel::tilt, Channel::intensity}) {
    const MonteCarloResult r = run(c, 0.04);
    const std::string n = std::string(to_string(c)) + " sigma 0.04: ";
    v.check(printed * r.mean_deltaF <= 1e-2 + printed * r.se_deltaF,
            n + "deltaF = " + fmt(printed * r.mean_deltaF) + " +- " + fmt(printed * r.se_deltaF) + " (bound 1e-2)");
    v.check(r.mean_delta_chi <= 4e-2 + r.se_delta_chi,
            n + "delta_chi = " + fmt(r.mean_delta_chi) + " +- " + fmt(r.se_delta_chi) + " (bound 4e-2)");
  }
  const MonteCarloResult lo = run(Channel::combined, 0.02), hi = run(Channel::combined, 0.05);
  const bool below = printed * lo.mean_deltaF <= 1e-2 + printed * lo.se_deltaF &&
                     lo.mean_delta_chi <= 4e-2 + lo.se_delta_chi;
  const bool above = printed * hi.mean_deltaF >= 1e-2 - printed * hi.se_deltaF ||
                     hi.mean_delta_chi >= 4e-2 - hi.se_delta_chi;
  v.check(below, "combined sigma 0.02 within bounds: deltaF = " + fmt(printed * lo.mean_deltaF) +
                     ", delta_chi = " + fmt(lo.mean_delta_chi));
  v.check(above, "combined sigma 0.05 beyond a bound: deltaF = " + fmt(printed * hi.mean_deltaF) +
                     ", delta_chi = " + fmt(hi.mean_delta_chi));
  return v;
}

// 11. Tweezer power and scattering budget.
Verdict feasibility() {
  Verdict v;
  const auto species = load_species(std::string(TWEEZER_SOURCE_DIR) + "/data/species.json");
  const std::map<std::string, std::pair<double, double>> table{
      {"Mg+", {6.4e-3, 4.9e-3}}, {"Ca+", {14.5e-3, 12.0e-3}}, {"Sr+", {40.2e-3, 30.2e-3}},
      {"Yb+", {202.2e-3, 38.2e-3}}, {"Ba+", {90.0e-3, 55.0e-3}}};
  const OpticsConfig o;
  std::set<std::string> seen;
  for (const auto& s : species) {
    const auto it = table.find(s.name);
    if (it == table.end()) continue;
    seen.insert(s.name);
    const FeasibilityRow r = feasibility_row(s, s.tweezer_wavelength_nm, 0.4, 0.07, o);
    check_rel(v, s.name + " power (W)", r.power_w, it->second.first, 0.25);
    check_rel(v, s.name + " deltaF_sc", r.deltaF_sc, it->second.second, 0.25);
    if (s.name == "Mg+") check_rel(v, "Mg+ deltaF_sc at nu0 = 0.2", scattering_infidelity(s, 400, 0.2, 0.07, o), 1.2e-3, 0.25);
  }
  v.check(seen.size() == table.size(), std::to_string(seen.size()) + " of 5 species present");
  check_abs(v, "epsilon(10 um, Mg+, 2 pi 5.5 MHz)", epsilon_physical(10e-6, 24, 2 * std::numbers::pi * 5.5e6), 0.07,
            0.005);
  return v;
}

// 12. Property suites.
Verdict properties() {
  Verdict v;
  // Mode orthonormality on the 130-ion chain.
  {
    const IonChain chain = solve_equilibrium(calibrate_gamma_for_epsilon(130, 15, 0.07));
    const TweezerArray tw{periodic_pinning(130, 6, 15, 17, 0.4, 0.4), std::nullopt};
    double worst = 0;
    for (Direction d : {Direction::x, Direction::y, Direction::z}) {
      const PhononModes pm = normal_modes(chain, tw, d);
      const Eigen::MatrixXd m = pm.mode_matrix;
      worst = std::max(worst, (m.transpose() * m - Eigen::MatrixXd::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff());
    }
    v.check(worst < 1e-10, "mode orthonormality residual " + fmt(worst));
    // y spectrum is blind to the tweezers.
    const PhononModes y0 = normal_modes(chain, TweezerArray::none(130), Direction::y);
    const PhononModes y1 = normal_modes(chain, tw, Direction::y);
    const double dy = (y0.freqs - y1.freqs).cwiseAbs().maxCoeff();
    v.check(dy < 1e-12, "y spectrum change under pinning " + fmt(dy));
  }
  // Segment integrals against adaptive quadrature.
  {
    using boost::math::quadrature::gauss_kronrod;
    double worst = 0;
    for (auto [mu, nu] : {std::pair{1.065, 1.0}, {1.0, 1.0}, {0.93, 1.08}}) {
      const double a = 3.0, b = 41.0;
      double re = 0, im = 0;
      for (int k = 0; k < 19; ++k) {
        const double lo = a + (b - a) * k / 19, hi = a + (b - a) * (k + 1) / 19;
        re += gauss_kronrod<double, 61>::integrate([&](double t) { return std::sin(mu * t) * std::cos(nu * t); }, lo, hi, 15, 1e-14);
        im += gauss_kronrod<double, 61>::integrate([&](double t) { return std::sin(mu * t) * std::sin(nu * t); }, lo, hi, 15, 1e-14);
      }
      worst = std::max(worst, std::abs(integrals::segment_g(mu, nu, a, b) - std::complex<double>(re, im)));
    }
    v.check(worst < 1e-10, "segment integral vs quadrature " + fmt(worst));
  }
  // Quadratic scaling of chi and the N = 2 Fock-space oracle.
  {
    ModeSet m;
    m.freqs = Eigen::Vector2d(1.0, 0.98);
    m.vectors.resize(2, 2);
    m.vectors << 1, 1, 1, -1;
    m.vectors /= std::sqrt(2.0);
    PulseSchedule s = PulseSchedule::empty(2, 300, 4);
    Eigen::VectorXd r0(4), r1(4);
    r0 << 0.002, -0.004, 0.003, 0.001;
    r1 << 0.0024, -0.002, 0.004, 0.0006;
    s.set_ion(0, 0.97, r0);
    s.set_ion(1, 0.965, r1, 250);
    const double chi = chi_pair(m, s, 0, 1);
    PulseSchedule t = s;
    for (auto& a : t.amplitude) a *= 3.0;
    v.check(chi_pair(m, t, 0, 1) == 9.0 * chi || std::abs(chi_pair(m, t, 0, 1) / (9.0 * chi) - 1.0) < 1e-15,
            "chi(3R) / 9 chi(R) - 1 = " + fmt(chi_pair(m, t, 0, 1) / (9.0 * chi) - 1.0));
    FockOracleSpec fs;
    const FockOracleResult fr = fock_oracle(m, s, chi, fs);
    v.check(std::abs(fr.chi - chi) <= 1e-4 * std::abs(chi), "Fock oracle chi relative error " + fmt(std::abs(fr.chi / chi - 1)));
    PulseSchedule weak = s;
    for (auto& a : weak.amplitude) a *= 0.1;
    const double pred = 0.8 * alpha_matrix(m, weak).cwiseAbs2().sum();
    const FockOracleResult fw = fock_oracle(m, weak, chi_pair(m, weak, 0, 1), fs);
    const double diff = std::abs(1 - fw.fidelity - pred);
    v.check(diff <= 1e-4, "Fock oracle infidelity " + fmt(1 - fw.fidelity) + " vs closed form " + fmt(pred) +
                              " (difference " + fmt(diff) + ")");
  }
  // Equilibrium against an independent long-double solver.
  {
    double worst = 0;
    for (int n = 2; n <= 5; ++n) {
      const Eigen::VectorXd u = detail::solve_scaled_equilibrium(n);
      const auto ref = tweezer_test::symmetric_oracle(n);
      for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(u[i] - static_cast<double>(ref[i])));
    }
    v.check(worst < 1e-9, "equilibrium N <= 5 vs oracle " + fmt(worst));
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"infinite stretch gate", infinite_stretch},
      {"infinite COM gate", infinite_com},
      {"crosstalk suppression for p >= 9", crosstalk_suppression},
      {"gate time scaling on the deltaF contour", sweep_scaling},
      {"finite 130-ion chain", finite_chain},
      {"optimized infinite layer", optimized_infinite},
      {"optimized finite layer", optimized_finite},
      {"band widths vs strong-pinning expansion", band_widths},
      {"adiabatic switching", switching},
      {"misadjustment Monte Carlo", misadjustment},
      {"feasibility table", feasibility},
      {"property suites", properties}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  std::vector<std::pair<int, Verdict>> results;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << std::setw(2) << id << " " << criteria[k].first << " ("
              << fmt(secs, 3) << " s)\n";
    for (const auto& l : v.lines) std::cout << "        " << l << "\n";
    std::cout.flush();
    results.emplace_back(id, v);
  }
  int passed = 0;
  for (const auto& [id, v] : results) passed += v.pass;
  std::cout << passed << " of " << results.size() << " criteria pass\n";
  return 0;
}
