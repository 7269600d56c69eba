#pragma once

// Qubit-phonon displacements alpha, qubit-qubit couplings chi and the gate
// error metrics for segmented amplitude-modulated pulses.
//
// Amplitudes are R = eta0 Omega / omega_x, times are omega_x t. Ion i drives
// from t = 0 to its window tau_i <= tau in S equal segments and is idle
// afterwards.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/bands.hpp"
#include "tweezer/error.hpp"
#include "tweezer/integrals.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/phonons.hpp"

namespace tweezer {

struct PulseSchedule {
  double duration = 0.0;  ///< layer duration omega_x tau
  int segments = 1;
  std::vector<double> mu;                   ///< per-ion detuning mu_i / omega_x
  std::vector<Eigen::VectorXd> amplitude;   ///< per-ion R_i (size S), empty when unaddressed
  std::vector<double> window;               ///< per-ion active window; <= 0 means the full duration

  static PulseSchedule empty(int n_ions, double duration, int segments) {
    PulseSchedule s;
    s.duration = duration;
    s.segments = segments;
    s.mu.assign(n_ions, 0.0);
    s.amplitude.assign(n_ions, Eigen::VectorXd());
    s.window.assign(n_ions, 0.0);
    return s;
  }

  int ions() const { return static_cast<int>(mu.size()); }
  bool addressed(int i) const { return amplitude[i].size() > 0 && amplitude[i].cwiseAbs().maxCoeff() > 0.0; }
  double window_of(int i) const { return window[i] > 0.0 ? window[i] : duration; }

  void set_ion(int i, double mu_i, const Eigen::VectorXd& r, double tau_i = 0.0) {
    mu[i] = mu_i;
    amplitude[i] = r;
    window[i] = tau_i;
  }

  void validate() const {
    detail::require(segments >= 1, "segments must be >= 1");
    detail::require(duration > 0.0, "duration must be positive");
    detail::require(amplitude.size() == mu.size() && window.size() == mu.size(), "schedule arrays differ in size");
    for (int i = 0; i < ions(); ++i) {
      if (amplitude[i].size() == 0) continue;
      detail::require(amplitude[i].size() == segments, "amplitude vector length must equal segments");
      detail::require(amplitude[i].allFinite(), "amplitudes must be finite");
      detail::require(window_of(i) <= duration * (1.0 + 1e-12), "ion window exceeds the layer duration");
    }
  }
};

struct GateLayer {
  std::vector<std::pair<int, int>> pairs;  ///< i < i'
  std::vector<double> target;              ///< chi0 per pair

  int size() const { return static_cast<int>(pairs.size()); }

  void validate() const {
    detail::require(!pairs.empty(), "gate layer must contain at least one pair");
    detail::require(target.size() == pairs.size(), "one target per pair required");
    std::set<int> used;
    for (std::size_t g = 0; g < pairs.size(); ++g) {
      const auto [a, b] = pairs[g];
      detail::require(a != b, "pair ions must differ");
      detail::require(used.insert(a).second && used.insert(b).second, "gate pairs must be disjoint");
      detail::require(std::abs(target[g]) <= std::numbers::pi / 4 + 1e-12, "|chi0| must be <= pi/4");
    }
  }
};

struct GateReport {
  Eigen::MatrixXd chi;        ///< symmetric, zero diagonal
  Eigen::MatrixXd alpha_sq;   ///< |alpha_i^n|^2, ions x modes (finite chains)
  double deltaF = 0.0;
  double delta_chi = 0.0;
  double crosstalk = 0.0;
  double crosstalk_tail = 0.0;  ///< estimated neglected crosstalk beyond the cut-off (infinite chains)
  double n_th = 0.5;
  int gates = 0;
};

namespace kernel {

/// Breakpoints of a window split into S equal segments.
inline std::vector<double> segment_edges(double window, int segments) {
  std::vector<double> e(segments + 1);
  for (int s = 0; s <= segments; ++s) e[s] = window * s / segments;
  return e;
}

/// Per-segment g_s = int_seg sin(mu t) e^{i nu t} dt.
inline Eigen::VectorXcd segment_gs(double mu, double nu, double window, int segments) {
  Eigen::VectorXcd g(segments);
  const double h = window / segments;
  for (int s = 0; s < segments; ++s) g[s] = integrals::segment_g(mu, nu, s * h, (s + 1) * h);
  return g;
}

/// S_a x S_b matrix F such that the single-mode contribution to chi_ab is
/// R_a^T F R_b (without the mode weight M_a M_b / nu).
inline Eigen::MatrixXd pair_kernel(double mu_a, double win_a, double mu_b, double win_b, int segments, double nu) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(segments, segments);
  if (std::abs(win_a - win_b) <= 1e-12 * std::max(win_a, win_b)) {
    const double h = win_a / segments;
    Eigen::VectorXcd ga(segments), gb(segments);
    for (int s = 0; s < segments; ++s) {
      ga[s] = integrals::segment_g(mu_a, nu, s * h, (s + 1) * h);
      gb[s] = mu_b == mu_a ? ga[s] : integrals::segment_g(mu_b, nu, s * h, (s + 1) * h);
    }
    const std::vector<double> diag = integrals::same_piece_f_pieces(mu_a, mu_b, nu, h, segments);
    for (int s = 0; s < segments; ++s) {
      for (int sp = 0; sp < s; ++sp) {
        f(s, sp) = (ga[s] * std::conj(gb[sp])).imag();
        f(sp, s) = (gb[s] * std::conj(ga[sp])).imag();
      }
      f(s, s) = diag[s];
    }
    return f;
  }
  // Unequal windows: refine both segmentations into common pieces.
  std::vector<double> cuts;
  cuts.reserve(2 * segments + 2);
  for (double e : segment_edges(win_a, segments)) cuts.push_back(e);
  for (double e : segment_edges(win_b, segments)) cuts.push_back(e);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [&](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(win_a, win_b); }),
             cuts.end());
  const int pieces = static_cast<int>(cuts.size()) - 1;
  std::vector<int> sa(pieces), sb(pieces);
  std::vector<std::complex<double>> ga(pieces), gb(pieces);
  for (int c = 0; c < pieces; ++c) {
    const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
    sa[c] = mid < win_a ? std::min(segments - 1, static_cast<int>(mid / (win_a / segments))) : -1;
    sb[c] = mid < win_b ? std::min(segments - 1, static_cast<int>(mid / (win_b / segments))) : -1;
    ga[c] = sa[c] >= 0 ? integrals::segment_g(mu_a, nu, cuts[c], cuts[c + 1]) : 0.0;
    gb[c] = sb[c] >= 0 ? integrals::segment_g(mu_b, nu, cuts[c], cuts[c + 1]) : 0.0;
  }
  for (int c = 0; c < pieces; ++c) {
    if (sa[c] < 0 && sb[c] < 0) continue;
    for (int cp = 0; cp < c; ++cp) {
      if (sa[c] >= 0 && sb[cp] >= 0) f(sa[c], sb[cp]) += (ga[c] * std::conj(gb[cp])).imag();
      if (sb[c] >= 0 && sa[cp] >= 0) f(sa[cp], sb[c]) += (gb[c] * std::conj(ga[cp])).imag();
    }
    if (sa[c] >= 0 && sb[c] >= 0) f(sa[c], sb[c]) += integrals::same_piece_f(mu_a, mu_b, nu, cuts[c], cuts[c + 1]);
  }
  return f;
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Finite chains

/// alpha(i, n) = -i (M_i^n / sqrt(nu_n)) sum_s g_i^{n,s} R_i^s.
inline Eigen::MatrixXcd alpha_matrix(const ModeSet& modes, const PulseSchedule& sched) {
  sched.validate();
  detail::require(sched.ions() == modes.ions(), "schedule and mode set differ in ion count");
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(modes.ions(), modes.modes());
  for (int i = 0; i < sched.ions(); ++i) {
    if (!sched.addressed(i)) continue;
    for (int n = 0; n < modes.modes(); ++n) {
      const Eigen::VectorXcd g = kernel::segment_gs(sched.mu[i], modes.freqs[n], sched.window_of(i), sched.segments);
      const std::complex<double> sum = (g.array() * sched.amplitude[i].array().cast<std::complex<double>>()).sum();
      a(i, n) = std::complex<double>(0.0, -1.0) * (modes.vectors(i, n) / std::sqrt(modes.freqs[n])) * sum;
    }
  }
  return a;
}

/// Infidelity matrix of one ion: (4/5)(2 n_th + 1) sum_n |alpha_i^n|^2 = R^T Phi R.
inline Eigen::MatrixXd phi_matrix(const ModeSet& modes, int ion, double mu, double window, int segments,
                                  double n_th = 0.5) {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(segments, segments);
  for (int n = 0; n < modes.modes(); ++n) {
    const double w = modes.vectors(ion, n) * modes.vectors(ion, n) / modes.freqs[n];
    if (w == 0.0) continue;
    const Eigen::VectorXcd g = kernel::segment_gs(mu, modes.freqs[n], window, segments);
    phi += w * (g.conjugate() * g.transpose()).real();
  }
  return 0.8 * (2.0 * n_th + 1.0) * phi;
}

/// chi_ab = R_a^T X R_b with X = sum_n (M_a^n M_b^n / nu_n) F^n.
inline Eigen::MatrixXd x_matrix(const ModeSet& modes, int a, double mu_a, double win_a, int b, double mu_b,
                                double win_b, int segments) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(segments, segments);
  for (int n = 0; n < modes.modes(); ++n) {
    const double w = modes.vectors(a, n) * modes.vectors(b, n) / modes.freqs[n];
    if (w == 0.0) continue;
    x += w * kernel::pair_kernel(mu_a, win_a, mu_b, win_b, segments, modes.freqs[n]);
  }
  return x;
}

inline double chi_pair(const ModeSet& modes, const PulseSchedule& sched, int a, int b) {
  if (!sched.addressed(a) || !sched.addressed(b)) return 0.0;
  const Eigen::MatrixXd x = x_matrix(modes, a, sched.mu[a], sched.window_of(a), b, sched.mu[b], sched.window_of(b),
                                     sched.segments);
  return sched.amplitude[a].dot(x * sched.amplitude[b]);
}

/// Symmetric coupling matrix over all addressed ion pairs.
inline Eigen::MatrixXd chi_matrix(const ModeSet& modes, const PulseSchedule& sched) {
  sched.validate();
  detail::require(sched.ions() == modes.ions(), "schedule and mode set differ in ion count");
  std::vector<int> active;
  for (int i = 0; i < sched.ions(); ++i)
    if (sched.addressed(i)) active.push_back(i);
  std::vector<std::pair<int, int>> jobs;
  for (std::size_t u = 0; u < active.size(); ++u)
    for (std::size_t v = u + 1; v < active.size(); ++v) jobs.emplace_back(active[u], active[v]);
  std::vector<double> values(jobs.size());
  parallel_for(jobs.size(), default_threads(), [&](std::size_t j) {
    values[j] = chi_pair(modes, sched, jobs[j].first, jobs[j].second);
  });
  Eigen::MatrixXd chi = Eigen::MatrixXd::Zero(sched.ions(), sched.ions());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    chi(jobs[j].first, jobs[j].second) = values[j];
    chi(jobs[j].second, jobs[j].first) = values[j];
  }
  return chi;
}

/// Error metrics per gate. `in_register` marks ions that count as qubits for
/// the crosstalk sum; an empty mask means every ion.
inline GateReport metrics(const Eigen::MatrixXcd& alpha, const Eigen::MatrixXd& chi, const GateLayer& layer,
                          double n_th = 0.5, const std::vector<bool>& in_register = {}) {
  layer.validate();
  detail::require(n_th >= 0.0, "n_th must be non-negative");
  const int n = static_cast<int>(chi.rows());
  GateReport r;
  r.chi = chi;
  r.alpha_sq = alpha.cwiseAbs2();
  r.n_th = n_th;
  r.gates = layer.size();
  const double g = layer.size();
  r.deltaF = 0.8 / g * r.alpha_sq.sum() * (2.0 * n_th + 1.0);
  std::set<std::pair<int, int>> targets;
  for (std::size_t k = 0; k < layer.pairs.size(); ++k) {
    auto [a, b] = layer.pairs[k];
    if (a > b) std::swap(a, b);
    detail::require(b < n, "gate pair outside the chain");
    targets.insert({a, b});
    r.delta_chi += std::abs(chi(a, b) - layer.target[k]);
  }
  r.delta_chi *= 2.0 / g;
  for (int a = 0; a < n; ++a) {
    if (!in_register.empty() && !in_register[a]) continue;
    for (int b = a + 1; b < n; ++b) {
      if (!in_register.empty() && !in_register[b]) continue;
      if (targets.count({a, b})) continue;
      r.crosstalk += std::abs(chi(a, b));
    }
  }
  r.crosstalk *= 2.0 / g;
  return r;
}

/// Full finite-chain evaluation of a schedule against a mode set.
inline GateReport evaluate_layer(const ModeSet& modes, const PulseSchedule& sched, const GateLayer& layer,
                                 double n_th = 0.5, const std::vector<bool>& in_register = {}) {
  return metrics(alpha_matrix(modes, sched), chi_matrix(modes, sched), layer, n_th, in_register);
}

// ---------------------------------------------------------------------------
// Infinite chains
//
// Ions are labelled (cell l, slot i). A periodic schedule repeats every
// `period` cells; entry g * p + i holds the pulse of slot i in cell g mod period.

struct PeriodicSchedule {
  int p = 0;
  int period = 1;
  double duration = 0.0;
  int segments = 1;
  std::vector<double> mu;
  std::vector<Eigen::VectorXd> amplitude;
  std::vector<double> window;

  static PeriodicSchedule empty(int p, int period, double duration, int segments) {
    PeriodicSchedule s;
    s.p = p;
    s.period = period;
    s.duration = duration;
    s.segments = segments;
    s.mu.assign(p * period, 0.0);
    s.amplitude.assign(p * period, Eigen::VectorXd());
    s.window.assign(p * period, 0.0);
    return s;
  }

  int entries() const { return p * period; }
  bool addressed(int e) const { return amplitude[e].size() > 0 && amplitude[e].cwiseAbs().maxCoeff() > 0.0; }
  double window_of(int e) const { return window[e] > 0.0 ? window[e] : duration; }
  int entry(long cell, int slot) const {
    const long g = ((cell % period) + period) % period;
    return static_cast<int>(g) * p + slot;
  }
};

/// A target pair inside the reference period: entries (g*p + i, g*p + i').
struct PeriodicLayer {
  std::vector<std::pair<int, int>> pairs;
  std::vector<double> target;
  int size() const { return static_cast<int>(pairs.size()); }
};

/// Per (k, n) segment integrals for a pulse.
inline std::vector<Eigen::VectorXcd> band_segment_gs(const BandStructure& bands, double mu, double window,
                                                     int segments) {
  const int K = bands.grid_size();
  std::vector<Eigen::VectorXcd> out(static_cast<std::size_t>(K) * bands.p);
  for (int kk = 0; kk < K; ++kk)
    for (int n = 0; n < bands.p; ++n)
      out[static_cast<std::size_t>(kk) * bands.p + n] = kernel::segment_gs(mu, bands.freqs(kk, n), window, segments);
  return out;
}

/// Per (k, n) pair kernels F.
inline std::vector<Eigen::MatrixXd> band_pair_kernels(const BandStructure& bands, double mu_a, double win_a,
                                                      double mu_b, double win_b, int segments) {
  const int K = bands.grid_size();
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(K) * bands.p);
  parallel_for(out.size(), default_threads(), [&](std::size_t j) {
    const int kk = static_cast<int>(j) / bands.p, n = static_cast<int>(j) % bands.p;
    out[j] = kernel::pair_kernel(mu_a, win_a, mu_b, win_b, segments, bands.freqs(kk, n));
  });
  return out;
}

/// Infidelity matrix of slot i: (4/5)(2 n_th + 1) sum over Bloch modes of
/// |alpha|^2 = R^T Phi R, using sum_lambda (M^{k,n,lambda}_{l,i})^2 = 2|B_i^{k,n}|^2.
inline Eigen::MatrixXd band_phi_matrix(const BandStructure& bands, int slot,
                                       const std::vector<Eigen::VectorXcd>& gs, double n_th = 0.5) {
  const int S = static_cast<int>(gs.front().size());
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(S, S);
  for (int kk = 0; kk < bands.grid_size(); ++kk) {
    for (int n = 0; n < bands.p; ++n) {
      const double w = 2.0 * std::norm(bands.vectors[kk](slot, n)) / bands.freqs(kk, n);
      const auto& g = gs[static_cast<std::size_t>(kk) * bands.p + n];
      phi += w * (g.conjugate() * g.transpose()).real();
    }
  }
  return 0.8 * (2.0 * n_th + 1.0) * bands.weight() * phi;
}

/// k-resolved residual |alpha|^2 per band for one ion: rows k, columns n.
inline Eigen::MatrixXd band_alpha_profile(const BandStructure& bands, int slot,
                                          const std::vector<Eigen::VectorXcd>& gs, const Eigen::VectorXd& r) {
  Eigen::MatrixXd prof(bands.grid_size(), bands.p);
  for (int kk = 0; kk < bands.grid_size(); ++kk)
    for (int n = 0; n < bands.p; ++n) {
      const auto& g = gs[static_cast<std::size_t>(kk) * bands.p + n];
      const std::complex<double> a = g.transpose() * r.cast<std::complex<double>>();
      prof(kk, n) = 2.0 * std::norm(bands.vectors[kk](slot, n)) / bands.freqs(kk, n) * std::norm(a);
    }
  return prof;
}

/// X between slot a in cell l and slot b in cell l' with delta = l - l'.
inline Eigen::MatrixXd band_x_matrix(const BandStructure& bands, int slot_a, int slot_b, long delta,
                                     const std::vector<Eigen::MatrixXd>& kernels) {
  const int S = static_cast<int>(kernels.front().rows());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(S, S);
  for (int kk = 0; kk < bands.grid_size(); ++kk) {
    const double c = std::cos(bands.k[kk] * delta), s = std::sin(bands.k[kk] * delta);
    for (int n = 0; n < bands.p; ++n) {
      const std::complex<double> ba = bands.vectors[kk](slot_a, n), bb = bands.vectors[kk](slot_b, n);
      const double sym = ba.real() * bb.real() + ba.imag() * bb.imag();
      const double asym = ba.real() * bb.imag() - ba.imag() * bb.real();
      const double w = 2.0 * (c * sym + s * asym) / bands.freqs(kk, n);
      x += w * kernels[static_cast<std::size_t>(kk) * bands.p + n];
    }
  }
  return bands.weight() * x;
}

/// X for a list of deltas at once (shares the per-k weights).
inline std::vector<Eigen::MatrixXd> band_x_matrices(const BandStructure& bands, int slot_a, int slot_b,
                                                    const std::vector<long>& deltas,
                                                    const std::vector<Eigen::MatrixXd>& kernels) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(deltas.size());
  for (long d : deltas) out.push_back(band_x_matrix(bands, slot_a, slot_b, d, kernels));
  return out;
}

struct InfiniteReport {
  GateReport report;
  std::vector<double> crosstalk_by_distance;  ///< per-gate contribution of pairs d cells apart
  std::vector<double> ion_alpha_sq;            ///< sum over modes of |alpha|^2 per schedule entry
};

/// Metrics per gate of a periodic layer, summing crosstalk out to
/// `max_cells` cells. The neglected tail is estimated from the last shells
/// assuming a 1/d^3 dipolar decay.
inline InfiniteReport evaluate_periodic(const BandStructure& bands, const PeriodicSchedule& sched,
                                        const PeriodicLayer& layer, double n_th = 0.5, int max_cells = 40) {
  detail::require(layer.size() >= 1, "periodic layer needs at least one gate");
  detail::require(max_cells >= 2 && max_cells * 4 <= bands.grid_size() * 2,
                  "crosstalk cut-off must stay well below the k-grid size");
  const int E = sched.entries();
  const int p = sched.p;
  InfiniteReport out;
  out.ion_alpha_sq.assign(E, 0.0);
  GateReport& r = out.report;
  r.n_th = n_th;
  r.gates = layer.size();

  // Residual displacements.
  double alpha_total = 0.0;
  for (int e = 0; e < E; ++e) {
    if (!sched.addressed(e)) continue;
    const auto gs = band_segment_gs(bands, sched.mu[e], sched.window_of(e), sched.segments);
    const Eigen::MatrixXd phi = band_phi_matrix(bands, e % p, gs, n_th);
    const double v = sched.amplitude[e].dot(phi * sched.amplitude[e]);
    out.ion_alpha_sq[e] = v / (0.8 * (2.0 * n_th + 1.0));
    alpha_total += out.ion_alpha_sq[e];
  }
  r.deltaF = 0.8 * (2.0 * n_th + 1.0) * alpha_total / layer.size();

  // Couplings. Pairs are counted once: first ion in the reference period,
  // second ion further right.
  std::set<std::pair<int, int>> targets;
  for (auto [a, b] : layer.pairs) targets.insert({std::min(a, b), std::max(a, b)});
  std::vector<int> active;
  for (int e = 0; e < E; ++e)
    if (sched.addressed(e)) active.push_back(e);

  std::map<std::pair<int, int>, std::vector<Eigen::MatrixXd>> kernel_cache;
  auto kernels_for = [&](int ea, int eb) -> const std::vector<Eigen::MatrixXd>& {
    const std::pair<int, int> key{ea, eb};
    auto it = kernel_cache.find(key);
    if (it != kernel_cache.end()) return it->second;
    // Identical pulses share one kernel set.
    for (auto& [k2, v] : kernel_cache) {
      if (sched.mu[k2.first] == sched.mu[ea] && sched.mu[k2.second] == sched.mu[eb] &&
          sched.window_of(k2.first) == sched.window_of(ea) && sched.window_of(k2.second) == sched.window_of(eb))
        return kernel_cache.emplace(key, v).first->second;
    }
    return kernel_cache
        .emplace(key, band_pair_kernels(bands, sched.mu[ea], sched.window_of(ea), sched.mu[eb], sched.window_of(eb),
                                        sched.segments))
        .first->second;
  };

  r.chi = Eigen::MatrixXd::Zero(E, E);
  out.crosstalk_by_distance.assign(max_cells + 1, 0.0);
  std::map<std::pair<int, int>, double> target_chi;
  for (int ea : active) {
    const long cell_a = ea / p;
    const int slot_a = ea % p;
    for (long cell_b = cell_a; cell_b <= cell_a + max_cells; ++cell_b) {
      for (int slot_b = 0; slot_b < p; ++slot_b) {
        const long ga = cell_a * p + slot_a, gb = cell_b * p + slot_b;
        if (gb <= ga) continue;
        const int eb = sched.entry(cell_b, slot_b);
        if (!sched.addressed(eb)) continue;
        // chi between (cell_a, slot_a) and (cell_b, slot_b); delta = l - l'.
        const auto& ker = kernels_for(ea, eb);
        const Eigen::MatrixXd x = band_x_matrix(bands, slot_a, slot_b, cell_a - cell_b, ker);
        const double chi = sched.amplitude[ea].dot(x * sched.amplitude[eb]);
        const bool inside = gb < static_cast<long>(E);
        if (inside) {
          r.chi(ea, static_cast<int>(gb)) = chi;
          r.chi(static_cast<int>(gb), ea) = chi;
        }
        if (inside && targets.count({ea, static_cast<int>(gb)})) {
          target_chi[{ea, static_cast<int>(gb)}] = chi;
          continue;
        }
        out.crosstalk_by_distance[cell_b - cell_a] += std::abs(chi);
      }
    }
  }
  for (std::size_t g = 0; g < layer.pairs.size(); ++g) {
    auto [a, b] = layer.pairs[g];
    if (a > b) std::swap(a, b);
    r.delta_chi += std::abs(target_chi[{a, b}] - layer.target[g]);
  }
  r.delta_chi *= 2.0 / layer.size();
  for (double& c : out.crosstalk_by_distance) c *= 2.0 / layer.size();
  for (double c : out.crosstalk_by_distance) r.crosstalk += c;
  // Tail: sum_{d > D} c_D (D/d)^3 ~ c_D D / 2.
  const double last = out.crosstalk_by_distance[max_cells];
  r.crosstalk_tail = last * max_cells / 2.0;
  return out;
}

}  // namespace tweezer
