#pragma once

// Minimal-control gate design: one constant-amplitude pulse per pinned pair,
// with duration fixed by the COM-stretch splitting and detuning refined to
// minimize the infidelity.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "tweezer/bands.hpp"
#include "tweezer/chain.hpp"
#include "tweezer/error.hpp"
#include "tweezer/gatekernel.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/phonons.hpp"

namespace tweezer {

enum class ModeChoice { com, stretch };

inline const char* to_string(ModeChoice m) { return m == ModeChoice::com ? "com" : "stretch"; }

inline ModeChoice mode_choice_from_string(const std::string& s) {
  if (s == "com" || s == "COM") return ModeChoice::com;
  if (s == "stretch") return ModeChoice::stretch;
  throw ConfigError("unknown mode choice '" + s + "' (expected com or stretch)");
}

/// How a finite-chain pair's COM and stretch frequencies are chosen.
enum class PairFrequencyRule {
  max_overlap_mode,  ///< eigenmode with the largest overlap with (e_i +- e_j)/sqrt(2)
  rayleigh,          ///< local Rayleigh quotient, insensitive to hybridization
};

inline const char* to_string(PairFrequencyRule r) {
  return r == PairFrequencyRule::rayleigh ? "rayleigh" : "max_overlap_mode";
}

inline PairFrequencyRule pair_frequency_rule_from_string(const std::string& s) {
  if (s == "max_overlap_mode") return PairFrequencyRule::max_overlap_mode;
  if (s == "rayleigh") return PairFrequencyRule::rayleigh;
  throw ConfigError("unknown pair frequency rule '" + s + "'");
}

struct DesignSpec {
  ModeChoice mode = ModeChoice::stretch;
  double chi_magnitude = std::numbers::pi / 4;
  int k_points = 200;
  double scan_halfwidth = 0.5;  ///< detuning window half-width in units of the COM-stretch splitting
  int scan_points = 21;         ///< coarse grid before Brent refinement
  double mu_tolerance = 1e-7;
  double n_th = 0.5;
  int crosstalk_cells = 40;
  PairFrequencyRule pair_frequencies = PairFrequencyRule::max_overlap_mode;

  void validate() const {
    detail::require(chi_magnitude > 0 && chi_magnitude <= std::numbers::pi / 4 + 1e-12, "chi magnitude must lie in (0, pi/4]");
    detail::require(k_points >= 16, "k grid needs at least 16 points");
    detail::require(scan_halfwidth > 0 && scan_halfwidth < 1.0,
                    "detuning window half-width must lie in (0, 1) splittings so it cannot reach a band centre");
    detail::require(scan_points >= 3, "scan needs at least 3 points");
    detail::require(mu_tolerance > 0, "detuning tolerance must be positive");
  }
};

/// Detuning seed for closed phase-space loops of both modes.
inline double detuning_seed(ModeChoice m, double nu_com, double nu_stretch) {
  return m == ModeChoice::com ? 2.0 * nu_com - nu_stretch : 2.0 * nu_stretch - nu_com;
}

struct ScanResult {
  double x = 0.0;
  double value = 0.0;
  std::vector<std::pair<double, double>> samples;
};

/// Coarse scan followed by Brent refinement between the neighbours of the
/// best sample.
inline ScanResult scan_minimize(const std::function<double(double)>& f, double lo, double hi, int points, double tol) {
  ScanResult r;
  int best = 0;
  for (int j = 0; j < points; ++j) {
    const double x = lo + (hi - lo) * j / (points - 1);
    const double v = f(x);
    r.samples.emplace_back(x, v);
    if (std::isfinite(v) && (j == 0 || !(v >= r.samples[best].second))) best = j;
  }
  const double a = r.samples[std::max(0, best - 1)].first;
  const double b = r.samples[std::min(points - 1, best + 1)].first;
  const double scale = std::max({std::abs(a), std::abs(b), 1.0});
  const int bits = std::clamp(static_cast<int>(std::ceil(-std::log2(tol / scale))), 8, 26);
  std::uintmax_t iters = 200;
  const auto [x, v] = boost::math::tools::brent_find_minima(f, a, b, bits, iters);
  r.x = x;
  r.value = v;
  if (r.samples[best].second < r.value) {
    r.x = r.samples[best].first;
    r.value = r.samples[best].second;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Infinite chains

struct InfiniteDesign {
  double nu_com = 0.0, nu_stretch = 0.0;  ///< band means
  double width_com = 0.0, width_stretch = 0.0;
  double tau = 0.0;
  double mu_seed = 0.0;
  double mu = 0.0;
  double mu_lo = 0.0, mu_hi = 0.0;
  double rabi = 0.0;       ///< eta0 Omega0 / omega_x
  double chi_sign = 0.0;   ///< sign of the target coupling for equal amplitudes
  PeriodicSchedule schedule;
  PeriodicLayer layer;
  InfiniteReport result;
  std::vector<std::pair<double, double>> scan;  ///< (mu, deltaF)
};

namespace detail {

// Infidelity per gate and unit-amplitude target coupling at detuning mu.
struct PairResponse {
  double phi = 0.0;  ///< deltaF for unit amplitude
  double x = 0.0;    ///< chi for unit amplitude
};

inline PairResponse infinite_pair_response(const BandStructure& bands, int slot_a, int slot_b, double mu, double tau,
                                           double n_th) {
  const auto ga = band_segment_gs(bands, mu, tau, 1);
  PairResponse r;
  r.phi = band_phi_matrix(bands, slot_a, ga, n_th)(0, 0) + band_phi_matrix(bands, slot_b, ga, n_th)(0, 0);
  const auto ker = band_pair_kernels(bands, mu, tau, mu, tau, 1);
  r.x = band_x_matrix(bands, slot_a, slot_b, 0, ker)(0, 0);
  return r;
}

}  // namespace detail

/// Minimal-control design on the infinite chain for the pinned pair in
/// slots cfg.pinned_slots[0..1] (bands 0 and 1 are COM and stretch).
inline InfiniteDesign design_infinite(const CellConfig& cfg, const DesignSpec& spec) {
  spec.validate();
  cfg.validate();
  detail::require(cfg.direction == Direction::x, "gate design uses the x bands");
  const BandStructure bands = band_structure(cfg, spec.k_points);
  InfiniteDesign d;
  d.nu_com = bands.band_mean(0);
  d.nu_stretch = bands.band_mean(1);
  d.width_com = bands.band_width(0);
  d.width_stretch = bands.band_width(1);
  const double split = d.nu_com - d.nu_stretch;
  if (!(split > 0)) throw NumericError("COM and stretch bands are not separated");
  // The pinned pair must dominate the two top bands.
  const int sa = cfg.pinned_slots[0], sb = cfg.pinned_slots[1];
  const int kmid = bands.grid_size() / 2;
  const double w0 = std::norm(bands.vectors[kmid](sa, 0)) + std::norm(bands.vectors[kmid](sb, 0));
  const double w1 = std::norm(bands.vectors[kmid](sa, 1)) + std::norm(bands.vectors[kmid](sb, 1));
  if (w0 < 0.81 || w1 < 0.81) throw NumericError("pinned pair is not localized in the two top bands (pinning too weak)");

  d.tau = 2.0 * std::numbers::pi / split;
  d.mu_seed = detuning_seed(spec.mode, d.nu_com, d.nu_stretch);
  d.mu_lo = d.mu_seed - spec.scan_halfwidth * split;
  d.mu_hi = d.mu_seed + spec.scan_halfwidth * split;

  auto infidelity = [&](double mu) {
    const auto r = detail::infinite_pair_response(bands, sa, sb, mu, d.tau, spec.n_th);
    return r.phi * spec.chi_magnitude / std::abs(r.x);
  };
  const ScanResult best = scan_minimize(infidelity, d.mu_lo, d.mu_hi, spec.scan_points, spec.mu_tolerance);
  d.mu = best.x;
  d.scan = best.samples;

  const auto resp = detail::infinite_pair_response(bands, sa, sb, d.mu, d.tau, spec.n_th);
  d.rabi = std::sqrt(spec.chi_magnitude / std::abs(resp.x));
  d.chi_sign = resp.x < 0 ? -1.0 : 1.0;

  d.schedule = PeriodicSchedule::empty(cfg.p, 1, d.tau, 1);
  for (int s : {sa, sb}) {
    d.schedule.mu[s] = d.mu;
    d.schedule.amplitude[s] = Eigen::VectorXd::Constant(1, d.rabi);
  }
  d.layer.pairs = {{std::min(sa, sb), std::max(sa, sb)}};
  d.layer.target = {d.chi_sign * spec.chi_magnitude};
  d.result = evaluate_periodic(bands, d.schedule, d.layer, spec.n_th, spec.crosstalk_cells);
  return d;
}

// ---------------------------------------------------------------------------
// Performance sweep over (epsilon, nu0)

struct SweepPoint {
  double epsilon = 0.0, nu0 = 0.0;
  double deltaF = 0.0, crosstalk = 0.0, tau = 0.0, mu = 0.0;
  bool insufficient_pinning = false;
  bool failed = false;
  std::string note;
};

struct ContourPoint {
  double nu0 = 0.0, epsilon = 0.0, tau = 0.0, crosstalk = 0.0;
};

struct SweepResult {
  int p = 0;
  std::vector<SweepPoint> points;      ///< row-major over (nu0, epsilon)
  std::vector<ContourPoint> contour;   ///< deltaF = level crossings along epsilon at fixed nu0
  double slope = 0.0;                  ///< log-log slope of tau vs nu0 on the contour
};

/// Pinning is insufficient when the COM-stretch splitting exceeds half the
/// gap between the stretch band and the highest unpinned band.
inline bool insufficient_pinning(const BandStructure& bands) {
  if (bands.p < 3) return false;
  const double split = bands.band_mean(0) - bands.band_mean(1);
  const double gap = bands.freqs.col(1).minCoeff() - bands.freqs.col(2).maxCoeff();
  return split > 0.5 * gap;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline SweepResult sweep_performance(int p, const std::vector<double>& epsilons, const std::vector<double>& nu0s,
                                     const DesignSpec& spec, double level = 1e-3, unsigned threads = 1) {
  detail::require(!epsilons.empty() && !nu0s.empty(), "sweep grid must not be empty");
  SweepResult out;
  out.p = p;
  out.points.resize(epsilons.size() * nu0s.size());
  parallel_for(out.points.size(), threads, [&](std::size_t j) {
    SweepPoint& pt = out.points[j];
    pt.nu0 = nu0s[j / epsilons.size()];
    pt.epsilon = epsilons[j % epsilons.size()];
    CellConfig cfg;
    cfg.p = p;
    cfg.nu0 = pt.nu0;
    cfg.epsilon = pt.epsilon;
    try {
      const BandStructure bands = band_structure(cfg, spec.k_points);
      pt.insufficient_pinning = insufficient_pinning(bands);
      const InfiniteDesign d = design_infinite(cfg, spec);
      pt.deltaF = d.result.report.deltaF;
      pt.crosstalk = d.result.report.crosstalk;
      pt.tau = d.tau;
      pt.mu = d.mu;
    } catch (const std::exception& e) {
      pt.failed = true;
      pt.insufficient_pinning = true;
      pt.note = e.what();
    }
  });
  // Contour: first crossing of deltaF = level when epsilon grows at fixed nu0,
  // interpolated linearly in (log epsilon, log deltaF).
  std::vector<double> cx, cy;
  for (std::size_t a = 0; a < nu0s.size(); ++a) {
    for (std::size_t b = 0; b + 1 < epsilons.size(); ++b) {
      const SweepPoint& u = out.points[a * epsilons.size() + b];
      const SweepPoint& v = out.points[a * epsilons.size() + b + 1];
      if (u.failed || v.failed || u.insufficient_pinning || v.insufficient_pinning) continue;
      if ((u.deltaF - level) * (v.deltaF - level) > 0) continue;
      const double t = (std::log(level) - std::log(u.deltaF)) / (std::log(v.deltaF) - std::log(u.deltaF));
      ContourPoint c;
      c.nu0 = u.nu0;
      c.epsilon = std::exp(std::log(u.epsilon) + t * (std::log(v.epsilon) - std::log(u.epsilon)));
      c.tau = std::exp(std::log(u.tau) + t * (std::log(v.tau) - std::log(u.tau)));
      c.crosstalk = std::exp(std::log(u.crosstalk) + t * (std::log(v.crosstalk) - std::log(u.crosstalk)));
      out.contour.push_back(c);
      cx.push_back(c.nu0);
      cy.push_back(c.tau);
      break;
    }
  }
  out.slope = loglog_slope(cx, cy);
  return out;
}

// ---------------------------------------------------------------------------
// Finite chains

struct PairDesign {
  int first = 0, second = 0;  ///< ion indices
  double nu_com = 0.0, nu_stretch = 0.0;
  double com_overlap = 0.0, stretch_overlap = 0.0;  ///< set by the max-overlap rule
  double tau = 0.0, mu_seed = 0.0, mu = 0.0, rabi = 0.0;
  double chi_sign = 0.0;
  double deltaF_pair = 0.0;  ///< infidelity of this gate alone
};

struct FiniteDesign {
  std::vector<PairDesign> pairs;
  PulseSchedule schedule;
  GateLayer layer;
  GateReport report;
  ModeSet modes;
  std::vector<bool> in_register;
};

/// Ion pairs of a periodic pinning pattern: (offset + g p, offset + g p + 1).
inline std::vector<std::pair<int, int>> periodic_pairs(int offset, int p, int count) {
  std::vector<std::pair<int, int>> v;
  for (int g = 0; g < count; ++g) v.emplace_back(offset + g * p, offset + g * p + 1);
  return v;
}

inline std::vector<bool> register_mask(const IonChain& chain) {
  std::vector<bool> m(chain.size());
  for (int i = 0; i < chain.size(); ++i) m[i] = !chain.is_buffer(i);
  return m;
}

namespace detail {

inline PairResponse finite_pair_response(const ModeSet& modes, int a, int b, double mu, double tau, double n_th) {
  PairResponse r;
  r.phi = phi_matrix(modes, a, mu, tau, 1, n_th)(0, 0) + phi_matrix(modes, b, mu, tau, 1, n_th)(0, 0);
  r.x = x_matrix(modes, a, mu, tau, b, mu, tau, 1)(0, 0);
  return r;
}

}  // namespace detail

inline FiniteDesign design_finite(const IonChain& chain, const TweezerArray& tw,
                                  const std::vector<std::pair<int, int>>& pairs, const DesignSpec& spec) {
  spec.validate();
  detail::require(!pairs.empty(), "no gate pairs given");
  const PhononModes pm = normal_modes(chain, tw, Direction::x);
  FiniteDesign out;
  out.modes = pm.as_mode_set();
  out.in_register = register_mask(chain);
  out.pairs.resize(pairs.size());

  for (std::size_t g = 0; g < pairs.size(); ++g) {
    PairDesign& pd = out.pairs[g];
    pd.first = pairs[g].first;
    pd.second = pairs[g].second;
    detail::require(tw.nu0[pd.first] > 0 && tw.nu0[pd.second] > 0, "gate pairs must be pinned");
    if (spec.pair_frequencies == PairFrequencyRule::max_overlap_mode) {
      const LocalizedPair lp = find_localized_pair_modes(pm, pd.first, pd.second, 0.0);
      pd.nu_com = pm.freqs[lp.com];
      pd.nu_stretch = pm.freqs[lp.stretch];
      pd.com_overlap = lp.com_overlap;
      pd.stretch_overlap = lp.stretch_overlap;
    } else {
      const PairFrequencies f = local_pair_frequencies(pm, pd.first, pd.second);
      pd.nu_com = f.com;
      pd.nu_stretch = f.stretch;
    }
  }

  parallel_for(out.pairs.size(), default_threads(), [&](std::size_t g) {
    PairDesign& pd = out.pairs[g];
    const double split = pd.nu_com - pd.nu_stretch;
    pd.tau = 2.0 * std::numbers::pi / std::abs(split);
    pd.mu_seed = detuning_seed(spec.mode, pd.nu_com, pd.nu_stretch);
    auto infidelity = [&](double mu) {
      const auto r = detail::finite_pair_response(out.modes, pd.first, pd.second, mu, pd.tau, spec.n_th);
      return r.phi * spec.chi_magnitude / std::abs(r.x);
    };
    const double hw = spec.scan_halfwidth * std::abs(split);
    const ScanResult best = scan_minimize(infidelity, pd.mu_seed - hw, pd.mu_seed + hw, spec.scan_points,
                                          spec.mu_tolerance);
    pd.mu = best.x;
    const auto r = detail::finite_pair_response(out.modes, pd.first, pd.second, pd.mu, pd.tau, spec.n_th);
    pd.rabi = std::sqrt(spec.chi_magnitude / std::abs(r.x));
    pd.chi_sign = r.x < 0 ? -1.0 : 1.0;
    pd.deltaF_pair = r.phi * pd.rabi * pd.rabi;
  });

  double tau_max = 0.0;
  for (const auto& pd : out.pairs) tau_max = std::max(tau_max, pd.tau);
  out.schedule = PulseSchedule::empty(chain.size(), tau_max, 1);
  for (const auto& pd : out.pairs) {
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, pd.rabi);
    out.schedule.set_ion(pd.first, pd.mu, r, pd.tau);
    out.schedule.set_ion(pd.second, pd.mu, r, pd.tau);
    out.layer.pairs.emplace_back(pd.first, pd.second);
    out.layer.target.push_back(pd.chi_sign * spec.chi_magnitude);
  }
  // Kraus-Cirac: a layer of xx gates needs a uniform coupling sign.
  for (double t : out.layer.target)
    if (t * out.layer.target.front() < 0) throw NumericError("designed pairs disagree on the coupling sign");
  out.report = evaluate_layer(out.modes, out.schedule, out.layer, spec.n_th, out.in_register);
  return out;
}

}  // namespace tweezer
