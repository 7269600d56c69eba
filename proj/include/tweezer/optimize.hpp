#pragma once

// Segmented-pulse optimal control.
//
// Infinite chains: a periodic cost function over G independent S-segment
// sequences per gate set, minimized by BFGS from random restarts on a
// detuning grid. Finite chains: per-pair generalized-eigenvector pulses and a
// left-to-right detuning assignment that trades infidelity for crosstalk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/bands.hpp"
#include "tweezer/chain.hpp"
#include "tweezer/design.hpp"
#include "tweezer/error.hpp"
#include "tweezer/gatekernel.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/phonons.hpp"
#include "tweezer/quasi_newton.hpp"
#include "tweezer/robustness.hpp"

namespace tweezer {

/// Discrete sine transform F_{s,s'} = sin(pi s (s' - 1/2) / S) / sqrt(S), s, s' = 1..S.
inline Eigen::MatrixXd sine_transform_matrix(int segments) {
  detail::require(segments >= 1, "sine transform needs S >= 1");
  Eigen::MatrixXd f(segments, segments);
  for (int s = 1; s <= segments; ++s)
    for (int sp = 1; sp <= segments; ++sp)
      f(s - 1, sp - 1) = std::sin(std::numbers::pi * s * (sp - 0.5) / segments) / std::sqrt(double(segments));
  return f;
}

inline Eigen::VectorXd sine_transform(const Eigen::VectorXd& r) {
  return sine_transform_matrix(static_cast<int>(r.size())) * r;
}

/// F F^T = diag(1/2, ..., 1/2, 1), so the inverse is F^T diag(2, ..., 2, 1).
inline Eigen::VectorXd inverse_sine_transform(const Eigen::VectorXd& rt) {
  const int s = static_cast<int>(rt.size());
  Eigen::VectorXd d = Eigen::VectorXd::Constant(s, 2.0);
  d[s - 1] = 1.0;
  return sine_transform_matrix(s).transpose() * d.cwiseProduct(rt);
}

/// Fraction of the sine spectrum carried by odd components s = 1, 3, 5, ...
inline double odd_fraction(const Eigen::VectorXd& r) {
  const Eigen::VectorXd t = sine_transform(r);
  double odd = 0.0;
  for (Eigen::Index s = 0; s < t.size(); s += 2) odd += t[s] * t[s];
  const double all = t.squaredNorm();
  return all > 0.0 ? odd / all : 0.0;
}

enum class AlphaCost {
  quartic,    ///< sum_i (sum_n |alpha_i^n|^2)^2
  quadratic,  ///< sum_i sum_n |alpha_i^n|^2
};

inline const char* to_string(AlphaCost a) { return a == AlphaCost::quartic ? "quartic" : "quadratic"; }

inline AlphaCost alpha_cost_from_string(const std::string& s) {
  if (s == "quartic") return AlphaCost::quartic;
  if (s == "quadratic") return AlphaCost::quadratic;
  throw ConfigError("unknown alpha cost '" + s + "' (expected quartic or quadratic)");
}

enum class Minimizer { levenberg_marquardt, bfgs };

inline const char* to_string(Minimizer m) { return m == Minimizer::bfgs ? "bfgs" : "levenberg_marquardt"; }

inline Minimizer minimizer_from_string(const std::string& s) {
  if (s == "levenberg_marquardt") return Minimizer::levenberg_marquardt;
  if (s == "bfgs") return Minimizer::bfgs;
  throw ConfigError("unknown minimizer '" + s + "' (expected levenberg_marquardt or bfgs)");
}

struct OptimizeSpec {
  int segments = 8;
  int groups = 4;                      ///< G independent sequences per set (infinite chains)
  double duration = 1500.0;
  int restarts = 16;
  int mu_points = 200;
  double window_margin = 0.5;          ///< detuning window reaches this many splittings past the bands
  double pair_window_margin = 3.0;     ///< finite chains: same, around each pair's COM and stretch modes
  double max_rabi = 0.01;              ///< restart range and variable scale for R = eta0 Omega / omega_x
  double target = -std::numbers::pi / 4;
  int cost_cells = 12;                 ///< J includes partners up to this many cells to the right
  int k_points = 200;
  int crosstalk_cells = 40;
  double n_th = 0.5;
  AlphaCost alpha_cost = AlphaCost::quartic;
  double deltaF_thresh = 1e-3;         ///< finite chains
  int iterations = 5;                  ///< finite chains
  int candidate_cap = 0;               ///< finite chains: best candidates kept per pair, 0 keeps all
  int crosstalk_neighbors = 4;         ///< finite chains: fixed pairs on each side considered per choice
  std::uint64_t seed = 1;
  Minimizer method = Minimizer::bfgs;
  int newton_polish = 200;             ///< exact-Hessian Newton steps after the quasi-Newton run
  MinimizeOptions minimizer{};
  LeastSquaresOptions least_squares{};

  void validate() const {
    detail::require(segments >= 1, "segments must be >= 1");
    detail::require(groups >= 1, "groups must be >= 1");
    detail::require(duration > 0, "duration must be positive");
    detail::require(restarts >= 1, "restarts must be >= 1");
    detail::require(mu_points >= 2, "detuning grid needs at least 2 points");
    detail::require(window_margin >= 0, "window margin must be non-negative");
    detail::require(max_rabi > 0, "max_rabi must be positive");
    detail::require(target != 0 && std::abs(target) <= std::numbers::pi / 4 + 1e-12, "target must lie in [-pi/4, pi/4]");
    detail::require(cost_cells >= 1, "cost_cells must be >= 1");
    detail::require(k_points >= 16, "k grid needs at least 16 points");
    detail::require(deltaF_thresh > 0, "deltaF_thresh must be positive");
    detail::require(iterations >= 1, "iterations must be >= 1");
    detail::require(candidate_cap >= 0, "candidate_cap must be >= 0");
    detail::require(pair_window_margin >= 0, "pair window margin must be non-negative");
    detail::require(crosstalk_neighbors >= 0, "crosstalk_neighbors must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Infinite chains

/// Cost of one gate set at a fixed detuning. Variables are the G sequences
/// stacked, cell g using sequence g mod G for both ions of its pair.
struct SetCost {
  int segments = 0, groups = 0, cells = 0;
  double target = 0.0;
  AlphaCost alpha_cost = AlphaCost::quartic;
  std::array<Eigen::MatrixXd, 2> phi;                       ///< sum_n |alpha|^2 = R^T phi R per slot
  std::vector<std::array<std::array<Eigen::MatrixXd, 2>, 2>> x;  ///< x[d][a][b]: partner d cells right

  struct Value {
    double total = 0.0, alpha = 0.0, chi = 0.0;
  };

  Value evaluate(const Eigen::VectorXd& r, Eigen::VectorXd* grad) const {
    Value v;
    if (grad) grad->setZero(r.size());
    const int S = segments;
    auto seq = [&](long cell) { return r.segment(((cell % groups + groups) % groups) * S, S); };
    for (int g = 0; g < groups; ++g) {
      const auto rg = seq(g);
      for (int a = 0; a < 2; ++a) {
        const Eigen::VectorXd pr = phi[a] * rg;
        const double q = rg.dot(pr);
        if (alpha_cost == AlphaCost::quartic) {
          v.alpha += q * q;
          if (grad) grad->segment(g * S, S) += 4.0 * q * pr;
        } else {
          v.alpha += q;
          if (grad) grad->segment(g * S, S) += 2.0 * pr;
        }
      }
    }
    // Coupling terms, batched by the partner's sequence.
    for (const auto& tg : terms) {
      const Eigen::VectorXd vx = tg.stack * r.segment(tg.partner * S, S);
      Eigen::VectorXd w(vx.size());
      for (std::size_t j = 0; j < tg.first.size(); ++j) {
        const auto rg = r.segment(tg.first[j] * S, S);
        const auto vj = vx.segment(j * S, S);
        const double dev = rg.dot(vj) - tg.target[j];
        v.chi += dev * dev;
        if (grad) {
          grad->segment(tg.first[j] * S, S) += 2.0 * dev * vj;
          w.segment(j * S, S) = 2.0 * dev * rg;
        }
      }
      if (grad) grad->segment(tg.partner * S, S).noalias() += tg.stack.transpose() * w;
    }
    v.total = v.alpha + v.chi;
    return v;
  }

  /// Exact Hessian of the cost (it is a quartic polynomial in R).
  Eigen::MatrixXd hessian(const Eigen::VectorXd& r) const {
    const int S = segments, n = groups * segments;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    auto seq = [&](long cell) { return r.segment((cell % groups) * S, S); };
    for (int g = 0; g < groups; ++g) {
      const auto rg = seq(g);
      for (int a = 0; a < 2; ++a) {
        if (alpha_cost == AlphaCost::quartic) {
          const Eigen::VectorXd pr = phi[a] * rg;
          h.block(g * S, g * S, S, S) += 4.0 * rg.dot(pr) * phi[a] + 8.0 * pr * pr.transpose();
        } else {
          h.block(g * S, g * S, S, S) += 2.0 * phi[a];
        }
      }
      for (int d = 0; d <= cells; ++d) {
        const int gp = static_cast<int>((g + d) % groups);
        const auto rp = seq(g + d);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            if (d == 0 && b <= a) continue;
            const Eigen::MatrixXd& xm = x[d][a][b];
            const double dev = rg.dot(xm * rp) - (d == 0 ? target : 0.0);
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
            grad.segment(g * S, S) += xm * rp;
            grad.segment(gp * S, S) += xm.transpose() * rg;
            h += 2.0 * grad * grad.transpose();
            h.block(g * S, gp * S, S, S) += 2.0 * dev * xm;
            h.block(gp * S, g * S, S, S) += 2.0 * dev * xm.transpose();
          }
      }
    }
    return h;
  }

  /// Number of residuals whose squares sum to the cost.
  int residual_count() const {
    const int alpha_rows = alpha_cost == AlphaCost::quartic ? 2 * groups : 2 * groups * segments;
    return alpha_rows + groups * (1 + 4 * cells);
  }

  /// Residual form of the cost: the quartic alpha term is (R^T phi R)^2 per
  /// ion, the quadratic one |U^T R|^2 with phi = U U^T.
  void residuals(const Eigen::VectorXd& r, Eigen::VectorXd& res, Eigen::MatrixXd* jac) const {
    const int S = segments;
    res.resize(residual_count());
    if (jac) jac->setZero(residual_count(), r.size());
    auto seq = [&](long cell) { return r.segment((cell % groups) * S, S); };
    int row = 0;
    for (int g = 0; g < groups; ++g) {
      const auto rg = seq(g);
      for (int a = 0; a < 2; ++a) {
        if (alpha_cost == AlphaCost::quartic) {
          const Eigen::VectorXd pr = phi[a] * rg;
          res[row] = rg.dot(pr);
          if (jac) jac->block(row, g * S, 1, S) = 2.0 * pr.transpose();
          ++row;
        } else {
          const Eigen::MatrixXd& u = phi_root[a];
          res.segment(row, S) = u.transpose() * rg;
          if (jac) jac->block(row, g * S, S, S) += u.transpose();
          row += S;
        }
      }
    }
    for (int g = 0; g < groups; ++g) {
      const auto rg = seq(g);
      for (int d = 0; d <= cells; ++d) {
        const int gp = static_cast<int>((g + d) % groups);
        const auto rp = seq(g + d);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            if (d == 0 && b <= a) continue;
            const Eigen::MatrixXd& xm = x[d][a][b];
            const Eigen::VectorXd xr = xm * rp;
            res[row] = rg.dot(xr) - (d == 0 ? target : 0.0);
            if (jac) {
              jac->block(row, g * S, 1, S) += xr.transpose();
              jac->block(row, gp * S, 1, S) += (xm.transpose() * rg).transpose();
            }
            ++row;
          }
      }
    }
  }

  std::array<Eigen::MatrixXd, 2> phi_root;  ///< phi = U U^T, filled for the quadratic alpha cost

  /// Coupling terms sharing a partner sequence, X blocks stacked vertically.
  struct TermGroup {
    int partner = 0;
    Eigen::MatrixXd stack;
    std::vector<int> first;
    std::vector<double> target;
  };
  std::vector<TermGroup> terms;

  void build_terms() {
    terms.assign(groups, TermGroup{});
    std::vector<std::vector<const Eigen::MatrixXd*>> blocks(groups);
    for (int g = 0; g < groups; ++g) terms[g].partner = g;
    for (int g = 0; g < groups; ++g)
      for (int d = 0; d <= cells; ++d)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            if (d == 0 && b <= a) continue;
            const int gp = (g + d) % groups;
            blocks[gp].push_back(&x[d][a][b]);
            terms[gp].first.push_back(g);
            terms[gp].target.push_back(d == 0 ? target : 0.0);
          }
    for (int gp = 0; gp < groups; ++gp) {
      terms[gp].stack.resize(static_cast<Eigen::Index>(blocks[gp].size()) * segments, segments);
      for (std::size_t j = 0; j < blocks[gp].size(); ++j)
        terms[gp].stack.middleRows(static_cast<Eigen::Index>(j) * segments, segments) = *blocks[gp][j];
    }
  }
};

/// Two bands carrying the most weight on the given slots.
inline std::array<int, 2> set_bands(const BandStructure& bands, std::array<int, 2> slots) {
  std::vector<std::pair<double, int>> w;
  for (int n = 0; n < bands.p; ++n) {
    double s = 0.0;
    for (int kk = 0; kk < bands.grid_size(); ++kk)
      for (int slot : slots) s += std::norm(bands.vectors[kk](slot, n));
    w.emplace_back(s, n);
  }
  std::sort(w.begin(), w.end(), std::greater<>());
  return {std::min(w[0].second, w[1].second), std::max(w[0].second, w[1].second)};
}

/// Detuning window of a set: its two bands plus `margin` splittings on each side.
inline std::pair<double, double> set_window(const BandStructure& bands, std::array<int, 2> slots, double margin) {
  const auto [hi_band, lo_band] = set_bands(bands, slots);  // descending order: smaller index is higher
  const double lo = bands.freqs.col(lo_band).minCoeff(), hi = bands.freqs.col(hi_band).maxCoeff();
  const double split = std::abs(bands.band_mean(hi_band) - bands.band_mean(lo_band));
  return {lo - margin * split, hi + margin * split};
}

inline SetCost build_set_cost(const BandStructure& bands, std::array<int, 2> slots, double mu, const OptimizeSpec& spec) {
  SetCost c;
  c.segments = spec.segments;
  c.groups = spec.groups;
  c.cells = spec.cost_cells;
  c.target = spec.target;
  c.alpha_cost = spec.alpha_cost;
  const auto gs = band_segment_gs(bands, mu, spec.duration, spec.segments);
  const double norm = 0.8 * (2.0 * spec.n_th + 1.0);
  for (int a = 0; a < 2; ++a) {
    c.phi[a] = band_phi_matrix(bands, slots[a], gs, spec.n_th) / norm;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.phi[a]);
    c.phi_root[a] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  const auto ker = band_pair_kernels(bands, mu, spec.duration, mu, spec.duration, spec.segments);
  c.x.resize(spec.cost_cells + 1);
  for (int d = 0; d <= spec.cost_cells; ++d)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        if (d > 0 || b > a) c.x[d][a][b] = band_x_matrix(bands, slots[a], slots[b], -d, ker);
  c.build_terms();
  return c;
}

struct SetOptimum {
  double mu = 0.0;
  double cost = std::numeric_limits<double>::infinity();
  double cost_alpha = 0.0, cost_chi = 0.0;
  double gradient_norm = 0.0;  ///< with respect to R
  bool converged = false;
  std::vector<Eigen::VectorXd> sequences;  ///< G vectors of length S
};

struct CostCurvePoint {
  double mu = 0.0, cost = 0.0, cost_alpha = 0.0, cost_chi = 0.0;
};

struct SetResult {
  std::array<int, 2> slots{0, 1};
  double mu_lo = 0.0, mu_hi = 0.0;
  SetOptimum best;
  std::vector<CostCurvePoint> curve;
  bool best_effort = false;  ///< no restart reached L < 1e-8
};

/// Minimizes the set cost at one detuning from `restarts` random starts.
inline SetOptimum optimize_set_at(const SetCost& cost, double mu, const OptimizeSpec& spec, std::uint64_t stream) {
  const int n = cost.groups * cost.segments;
  const double scale = spec.max_rabi;
  const Objective f = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    const auto v = cost.evaluate(scale * u, &g);
    g *= scale;
    return v.total;
  };
  const Residuals res = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    cost.residuals(scale * u, r, jac);
    if (jac) *jac *= scale;
  };
  const auto hess = [&](const Eigen::VectorXd& u) -> Eigen::MatrixXd { return scale * scale * cost.hessian(scale * u); };
  SetOptimum best;
  best.mu = mu;
  for (int r = 0; r < spec.restarts; ++r) {
    std::mt19937_64 rng(splitmix64(stream ^ splitmix64(static_cast<std::uint64_t>(r) + 1)));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd u0(n);
    for (int i = 0; i < n; ++i) u0[i] = uni(rng);
    MinimizeResult m = spec.method == Minimizer::bfgs ? bfgs_minimize(f, u0, spec.minimizer)
                                                        : least_squares(res, cost.residual_count(), u0, spec.least_squares);
    if (spec.newton_polish > 0) m = newton_polish(f, hess, m.x, spec.newton_polish, spec.minimizer.gradient_tol);
    if (!(m.value < best.cost)) continue;
    Eigen::VectorXd g(n);
    const Eigen::VectorXd rr = scale * m.x;
    const auto v = cost.evaluate(rr, &g);
    best.cost = v.total;
    best.cost_alpha = v.alpha;
    best.cost_chi = v.chi;
    best.gradient_norm = g.norm();
    best.converged = m.converged;
    best.sequences.clear();
    for (int gi = 0; gi < cost.groups; ++gi) best.sequences.push_back(rr.segment(gi * cost.segments, cost.segments));
  }
  return best;
}

inline SetResult optimize_set(const BandStructure& bands, std::array<int, 2> slots, const OptimizeSpec& spec,
                              unsigned threads = 1) {
  SetResult out;
  out.slots = slots;
  std::tie(out.mu_lo, out.mu_hi) = set_window(bands, slots, spec.window_margin);
  std::vector<SetOptimum> results(spec.mu_points);
  parallel_for(results.size(), threads, [&](std::size_t j) {
    const double mu = out.mu_lo + (out.mu_hi - out.mu_lo) * j / (spec.mu_points - 1);
    const SetCost c = build_set_cost(bands, slots, mu, spec);
    const std::uint64_t stream = splitmix64(spec.seed ^ splitmix64(1000003ull * (slots[0] + 1) + j));
    results[j] = optimize_set_at(c, mu, spec, stream);
  });
  for (const auto& r : results) {
    out.curve.push_back({r.mu, r.cost, r.cost_alpha, r.cost_chi});
    if (r.cost < out.best.cost) out.best = r;
  }
  out.best_effort = !(out.best.cost < 1e-8);
  return out;
}

struct InfiniteOptimization {
  std::array<SetResult, 2> sets;  ///< pinned pair slots, then the unpinned pair slots
  PeriodicSchedule schedule;
  PeriodicLayer layer;
  InfiniteReport result;
  double max_rabi = 0.0;
};

/// Periodic schedule of both sets: cell g of the period uses sequence g of each set.
inline PeriodicSchedule combined_schedule(int p, const std::array<SetResult, 2>& sets, const OptimizeSpec& spec) {
  PeriodicSchedule s = PeriodicSchedule::empty(p, spec.groups, spec.duration, spec.segments);
  for (const auto& set : sets)
    for (int g = 0; g < spec.groups; ++g)
      for (int slot : set.slots) {
        const int e = g * p + slot;
        s.mu[e] = set.best.mu;
        s.amplitude[e] = set.best.sequences[g];
      }
  return s;
}

/// Dense layer on p = 4 cells with pinned slots {0, 1}: gates on both the
/// pinned pair and the unpinned pair of every cell, optimized independently
/// and evaluated together afterwards.
inline InfiniteOptimization optimize_infinite(const CellConfig& cfg, const OptimizeSpec& spec, unsigned threads = 1) {
  cfg.validate();
  spec.validate();
  detail::require(cfg.p % 2 == 0 && cfg.p >= 4, "dense optimization needs an even cell size p >= 4");
  detail::require(cfg.pinned_slots[0] == 0 && cfg.pinned_slots[1] == 1, "dense optimization expects pinned slots {0, 1}");
  const BandStructure bands = band_structure(cfg, spec.k_points);
  InfiniteOptimization out;
  out.sets[0] = optimize_set(bands, {0, 1}, spec, threads);
  out.sets[1] = optimize_set(bands, {2, 3}, spec, threads);
  out.schedule = combined_schedule(cfg.p, out.sets, spec);
  for (int g = 0; g < spec.groups; ++g)
    for (const auto& set : out.sets) {
      out.layer.pairs.emplace_back(g * cfg.p + set.slots[0], g * cfg.p + set.slots[1]);
      out.layer.target.push_back(spec.target);
    }
  out.result = evaluate_periodic(bands, out.schedule, out.layer, spec.n_th, spec.crosstalk_cells);
  for (const auto& a : out.schedule.amplitude)
    if (a.size()) out.max_rabi = std::max(out.max_rabi, a.cwiseAbs().maxCoeff());
  return out;
}

// ---------------------------------------------------------------------------
// Finite chains

struct PairPulse {
  bool feasible = false;
  double mu = 0.0;
  Eigen::VectorXd amplitude;
  double deltaF = std::numeric_limits<double>::infinity();  ///< infidelity of this gate alone
  double chi = 0.0;
};

/// Minimizes R^T Phi R subject to R^T X R = target for one pair driven by a
/// common sequence. The symmetric part of X and Phi = Phi_a + Phi_b define the
/// generalized problem X v = lambda Phi v; the eigenvector with the largest
/// |lambda| of the target's sign is rescaled onto the constraint.
inline PairPulse optimize_pair_wu(const ModeSet& modes, std::pair<int, int> pair, double mu, int segments,
                                  double tau, double target = -std::numbers::pi / 4, double n_th = 0.5) {
  detail::require(target != 0.0, "target coupling must be non-zero");
  const auto [a, b] = pair;
  const Eigen::MatrixXd phi =
      phi_matrix(modes, a, mu, tau, segments, n_th) + phi_matrix(modes, b, mu, tau, segments, n_th);
  const Eigen::MatrixXd x = x_matrix(modes, a, mu, tau, b, mu, tau, segments);
  const Eigen::MatrixXd xs = 0.5 * (x + x.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(xs, phi);
  PairPulse out;
  out.mu = mu;
  if (es.info() != Eigen::Success) return out;
  // Eigenvalues ascending: the most negative is first, the most positive last.
  const Eigen::Index k = target < 0 ? 0 : segments - 1;
  const double lambda = es.eigenvalues()[k];
  if (lambda * target <= 0.0) return out;
  Eigen::VectorXd v = es.eigenvectors().col(k);
  v *= std::sqrt(target / v.dot(xs * v));
  out.feasible = true;
  out.amplitude = v;
  out.chi = v.dot(x * v);
  out.deltaF = v.dot(phi * v);
  return out;
}

struct PairCandidates {
  int first = 0, second = 0;
  double mu_lo = 0.0, mu_hi = 0.0;
  std::vector<PairPulse> grid;          ///< full detuning scan
  std::vector<int> candidates;          ///< grid indices below threshold, best first, capped
  int best = -1;                        ///< grid index of the lowest infidelity
};

struct FiniteOptimization {
  std::vector<PairCandidates> pairs;
  std::vector<int> choice;              ///< chosen grid index per pair
  std::vector<double> crosstalk_history;  ///< estimated neighbourhood crosstalk after each pass
  PulseSchedule schedule;
  GateLayer layer;
  GateReport report;
  ModeSet modes;
  double max_rabi = 0.0;
};

/// Pairs of a dense layer: every register ion paired with its neighbour.
inline std::vector<std::pair<int, int>> dense_pairs(const IonChain& chain) {
  std::vector<std::pair<int, int>> v;
  const int nb = chain.config.n_buffer;
  for (int i = nb; i + 1 < chain.size() - nb; i += 2) v.emplace_back(i, i + 1);
  return v;
}

/// Detuning window of a pair: its max-overlap COM and stretch modes plus
/// `margin` splittings on each side.
inline std::pair<double, double> pair_window(const PhononModes& pm, std::pair<int, int> pr, double margin) {
  const LocalizedPair lp = find_localized_pair_modes(pm, pr.first, pr.second, 0.0);
  const double c = pm.freqs[lp.com], s = pm.freqs[lp.stretch];
  const double split = std::max(std::abs(c - s), 1e-6);
  return {std::min(c, s) - margin * split, std::max(c, s) + margin * split};
}

namespace detail {

/// sum |chi| over the four ion combinations of two pairs.
inline double pair_crosstalk(const ModeSet& modes, const std::pair<int, int>& pa, const PairPulse& a,
                             const std::pair<int, int>& pb, const PairPulse& b, double tau, int segments) {
  const int ia[2] = {pa.first, pa.second}, ib[2] = {pb.first, pb.second};
  std::array<Eigen::MatrixXd, 4> x;
  for (auto& m : x) m = Eigen::MatrixXd::Zero(segments, segments);
  for (int n = 0; n < modes.modes(); ++n) {
    const Eigen::MatrixXd f = kernel::pair_kernel(a.mu, tau, b.mu, tau, segments, modes.freqs[n]);
    for (int u = 0; u < 2; ++u)
      for (int v = 0; v < 2; ++v)
        x[2 * u + v] += (modes.vectors(ia[u], n) * modes.vectors(ib[v], n) / modes.freqs[n]) * f;
  }
  double c = 0.0;
  for (const auto& m : x) c += std::abs(a.amplitude.dot(m * b.amplitude));
  return c;
}

}  // namespace detail

inline FiniteOptimization optimize_finite(const IonChain& chain, const TweezerArray& tw,
                                          const std::vector<std::pair<int, int>>& pairs, const OptimizeSpec& spec,
                                          unsigned threads = 1) {
  spec.validate();
  detail::require(!pairs.empty(), "no gate pairs given");
  const PhononModes pm = normal_modes(chain, tw, Direction::x);
  FiniteOptimization out;
  out.modes = pm.as_mode_set();
  const int P = static_cast<int>(pairs.size());
  out.pairs.resize(P);

  // Candidate detunings per pair.
  parallel_for(static_cast<std::size_t>(P), threads, [&](std::size_t j) {
    PairCandidates& pc = out.pairs[j];
    pc.first = pairs[j].first;
    pc.second = pairs[j].second;
    std::tie(pc.mu_lo, pc.mu_hi) = pair_window(pm, pairs[j], spec.pair_window_margin);
    pc.grid.resize(spec.mu_points);
    for (int m = 0; m < spec.mu_points; ++m) {
      const double mu = pc.mu_lo + (pc.mu_hi - pc.mu_lo) * m / (spec.mu_points - 1);
      pc.grid[m] = optimize_pair_wu(out.modes, pairs[j], mu, spec.segments, spec.duration, spec.target, spec.n_th);
      if (pc.grid[m].feasible && (pc.best < 0 || pc.grid[m].deltaF < pc.grid[pc.best].deltaF)) pc.best = m;
    }
    for (int m = 0; m < spec.mu_points; ++m)
      if (pc.grid[m].feasible && pc.grid[m].deltaF < spec.deltaF_thresh) pc.candidates.push_back(m);
    std::sort(pc.candidates.begin(), pc.candidates.end(),
              [&](int u, int v) { return pc.grid[u].deltaF < pc.grid[v].deltaF; });
    if (spec.candidate_cap > 0 && static_cast<int>(pc.candidates.size()) > spec.candidate_cap)
      pc.candidates.resize(spec.candidate_cap);
  });
  for (const auto& pc : out.pairs)
    if (pc.best < 0) throw NumericError("no feasible pulse for pair (" + std::to_string(pc.first) + ", " +
                                        std::to_string(pc.second) + ")");

  // Left-to-right assignment.
  std::map<std::tuple<int, int, int, int>, double> cache;
  auto crosstalk = [&](int p, int cp, int q, int cq) {
    const auto key = p < q ? std::make_tuple(p, cp, q, cq) : std::make_tuple(q, cq, p, cp);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const double v = detail::pair_crosstalk(out.modes, pairs[p], out.pairs[p].grid[cp], pairs[q],
                                            out.pairs[q].grid[cq], spec.duration, spec.segments);
    return cache.emplace(key, v).first->second;
  };
  out.choice.assign(P, -1);
  for (int it = 0; it < spec.iterations; ++it) {
    for (int p = 0; p < P; ++p) {
      const PairCandidates& pc = out.pairs[p];
      if (p == 0 && it == 0) {
        out.choice[p] = pc.best;
        continue;
      }
      if (pc.candidates.empty()) {
        out.choice[p] = pc.best;
        continue;
      }
      std::vector<int> fixed;
      for (int q = std::max(0, p - spec.crosstalk_neighbors); q <= std::min(P - 1, p + spec.crosstalk_neighbors); ++q)
        if (q != p && out.choice[q] >= 0) fixed.push_back(q);
      if (fixed.empty()) {
        out.choice[p] = pc.best;
        continue;
      }
      std::vector<double> score(pc.candidates.size(), 0.0);
      for (std::size_t c = 0; c < pc.candidates.size(); ++c)
        for (int q : fixed) score[c] += crosstalk(p, pc.candidates[c], q, out.choice[q]);
      out.choice[p] = pc.candidates[std::min_element(score.begin(), score.end()) - score.begin()];
    }
    double total = 0.0;
    for (int p = 0; p < P; ++p)
      for (int q = p + 1; q <= std::min(P - 1, p + spec.crosstalk_neighbors); ++q)
        total += crosstalk(p, out.choice[p], q, out.choice[q]);
    out.crosstalk_history.push_back(2.0 * total / P);
  }

  out.schedule = PulseSchedule::empty(chain.size(), spec.duration, spec.segments);
  for (int p = 0; p < P; ++p) {
    const PairPulse& pp = out.pairs[p].grid[out.choice[p]];
    out.schedule.set_ion(pairs[p].first, pp.mu, pp.amplitude);
    out.schedule.set_ion(pairs[p].second, pp.mu, pp.amplitude);
    out.layer.pairs.push_back(pairs[p]);
    out.layer.target.push_back(spec.target);
    out.max_rabi = std::max(out.max_rabi, pp.amplitude.cwiseAbs().maxCoeff());
  }
  out.report = evaluate_layer(out.modes, out.schedule, out.layer, spec.n_th, register_mask(chain));
  return out;
}

}  // namespace tweezer
