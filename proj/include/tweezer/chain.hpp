#pragma once

// Axial equilibrium of a linear ion string in a harmonic Paul trap.
//
// Units: lengths in l0 = (e^2 / 4 pi eps0 m omega_x^2)^(1/3), energies in
// m omega_x^2 l0^2, frequencies in omega_x.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/constants.hpp"
#include "tweezer/error.hpp"

namespace tweezer {

struct TrapConfig {
  int n_ions = 2;
  double gamma_z = 0.05;  ///< omega_z / omega_x
  double gamma_y = 0.8;   ///< omega_y / omega_x
  int n_buffer = 0;       ///< excluded ions at each end

  void validate() const {
    detail::require(n_ions >= 1, "n_ions must be >= 1");
    detail::require(gamma_z > 0.0 && gamma_z < 1.0, "gamma_z must lie in (0, 1)");
    detail::require(gamma_y > 0.0 && gamma_y <= 1.0, "gamma_y must lie in (0, 1]");
    detail::require(n_buffer >= 0 && 2 * n_buffer < n_ions, "2 * n_buffer must be < n_ions");
  }
};

struct IonChain {
  TrapConfig config;
  std::vector<double> positions;  ///< axial coordinates in l0, increasing
  double mean_spacing = 0.0;      ///< over non-buffer ions, in l0
  double epsilon = 0.0;           ///< (l0 / mean_spacing)^(3/2)
  double force_residual = 0.0;    ///< max |dU/du_i| at the solution

  int size() const { return static_cast<int>(positions.size()); }
  bool is_buffer(int i) const {
    return i < config.n_buffer || i >= size() - config.n_buffer;
  }
};

namespace detail {

// Gradient of U(u) = sum u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j| in trap-frequency
// scaled coordinates (omega_z based lengths).
inline Eigen::VectorXd axial_gradient(const Eigen::VectorXd& u) {
  const Eigen::Index n = u.size();
  Eigen::VectorXd g = u;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = u[j] - u[i];
      const double f = 1.0 / (d * d) * (d > 0 ? 1.0 : -1.0);
      g[i] += f;
      g[j] -= f;
    }
  }
  return g;
}

inline Eigen::MatrixXd axial_hessian(const Eigen::VectorXd& u) {
  const Eigen::Index n = u.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = 2.0 / std::pow(std::abs(u[j] - u[i]), 3);
      h(i, i) += c;
      h(j, j) += c;
      h(i, j) -= c;
      h(j, i) -= c;
    }
  }
  return h;
}

inline double axial_energy(const Eigen::VectorXd& u) {
  double e = 0.5 * u.squaredNorm();
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = i + 1; j < u.size(); ++j) e += 1.0 / std::abs(u[j] - u[i]);
  return e;
}

// Initial guess: parabolic line density on [-L, L] (large-N continuum limit).
inline Eigen::VectorXd axial_initial_guess(int n) {
  Eigen::VectorXd u(n);
  if (n == 1) {
    u[0] = 0.0;
    return u;
  }
  const double half_length = std::cbrt(3.0 * n * std::log(static_cast<double>(n) + 1.0)) * 0.9 + 0.5;
  for (int i = 0; i < n; ++i) {
    // Invert F(x) = (3x - x^3)/4 + 1/2 at the cell midpoint quantile.
    const double q = (i + 0.5) / n;
    double x = 2.0 * q - 1.0;
    for (int it = 0; it < 60; ++it) {
      const double f = (3.0 * x - x * x * x) / 4.0 + 0.5 - q;
      const double df = 0.75 * (1.0 - x * x);
      if (df < 1e-12) break;
      x = std::clamp(x - f / df, -1.0, 1.0);
    }
    u[i] = half_length * x;
  }
  return u;
}

// Solves the scaled axial equilibrium (omega_z-based units) by damped Newton.
inline Eigen::VectorXd solve_scaled_equilibrium(int n, int max_iter = 200) {
  Eigen::VectorXd u = axial_initial_guess(n);
  if (n == 1) return u;
  double energy = axial_energy(u);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = axial_gradient(u);
    if (g.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, u.lpNorm<Eigen::Infinity>())) return u;
    const Eigen::VectorXd step = axial_hessian(u).ldlt().solve(-g);
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = u + t * step;
      bool ordered = true;
      for (int i = 1; i < n; ++i) ordered = ordered && trial[i] > trial[i - 1];
      if (!ordered) continue;
      const double e = axial_energy(trial);
      if (e <= energy + 1e-14 * std::abs(energy) || t < 1e-6) {
        u = trial;
        energy = e;
        break;
      }
    }
    // Reflection symmetry of the exact solution.
    for (int i = 0; i < n / 2; ++i) {
      const double s = 0.5 * (u[n - 1 - i] - u[i]);
      u[i] = -s;
      u[n - 1 - i] = s;
    }
    if (n % 2 == 1) u[n / 2] = 0.0;
  }
  const double res = axial_gradient(u).lpNorm<Eigen::Infinity>();
  if (res > 1e-10) {
    std::ostringstream os;
    os << "equilibrium solver did not converge for N=" << n << " (residual " << res << ")";
    throw NumericError(os.str());
  }
  return u;
}

inline double mean_spacing_scaled(const Eigen::VectorXd& u, int n_buffer) {
  const int first = n_buffer;
  const int last = static_cast<int>(u.size()) - 1 - n_buffer;
  if (last <= first) return 0.0;
  return (u[last] - u[first]) / (last - first);
}

// Largest eigenvalue of the transverse Coulomb coupling in omega_z-based units.
// The linear chain is stable in a transverse direction with ratio gamma_t iff
// gamma_t^2 > gamma_z^2 * value.
inline double transverse_softening(const Eigen::VectorXd& u) {
  const Eigen::Index n = u.size();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        const double k = 1.0 / std::pow(std::abs(u[i] - u[j]), 3);
        c(i, i) += k;
        c(i, j) -= k;
      }
  if (n == 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace detail

/// Axial force dU/du_i at every ion for the given positions (l0 units).
inline std::vector<double> axial_forces(const TrapConfig& cfg, const std::vector<double>& positions) {
  const double g2 = cfg.gamma_z * cfg.gamma_z;
  std::vector<double> f(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double s = g2 * positions[i];
    for (std::size_t j = 0; j < positions.size(); ++j) {
      if (i == j) continue;
      const double d = positions[i] - positions[j];
      s -= (d > 0 ? 1.0 : -1.0) / (d * d);
    }
    f[i] = s;
  }
  return f;
}

/// Stationary point of the axial potential.
///
/// Positions are first solved in omega_z-based units, where they do not
/// depend on gamma_z, and then scaled by gamma_z^(-2/3).
inline IonChain solve_equilibrium(const TrapConfig& cfg) {
  cfg.validate();
  const Eigen::VectorXd scaled = detail::solve_scaled_equilibrium(cfg.n_ions);
  const double scale = std::pow(cfg.gamma_z, -2.0 / 3.0);
  IonChain chain;
  chain.config = cfg;
  chain.positions.resize(cfg.n_ions);
  for (int i = 0; i < cfg.n_ions; ++i) chain.positions[i] = scale * scaled[i];
  chain.mean_spacing = scale * detail::mean_spacing_scaled(scaled, cfg.n_buffer);
  chain.epsilon = chain.mean_spacing > 0 ? std::pow(1.0 / chain.mean_spacing, 1.5) : 0.0;
  const auto forces = axial_forces(cfg, chain.positions);
  for (double f : forces) chain.force_residual = std::max(chain.force_residual, std::abs(f));
  return chain;
}

/// Largest gamma_z for which the linear chain of n ions stays linear
/// (stable in the weaker transverse direction gamma_y).
inline double zigzag_gamma_threshold(int n_ions, double gamma_y) {
  const Eigen::VectorXd u = detail::solve_scaled_equilibrium(n_ions);
  const double soft = detail::transverse_softening(u);
  return soft > 0 ? gamma_y / std::sqrt(soft) : 1.0;
}

/// Trap ratio gamma_z for which the non-buffer mean spacing gives the target
/// epsilon. epsilon scales linearly with gamma_z at fixed N, so the root of
/// epsilon(gamma_z) - target is found from one scaled solve and then verified.
inline TrapConfig calibrate_gamma_for_epsilon(int n_ions, int n_buffer, double target_epsilon,
                                              double gamma_y = 0.8) {
  detail::require(target_epsilon > 0.0 && target_epsilon < 0.3, "target epsilon must lie in (0, 0.3)");
  detail::require(n_ions >= 2 && 2 * n_buffer < n_ions - 1, "need at least two non-buffer ions");
  const Eigen::VectorXd u = detail::solve_scaled_equilibrium(n_ions);
  const double d_scaled = detail::mean_spacing_scaled(u, n_buffer);
  // epsilon = (gamma^(2/3) / d_scaled)^(3/2) = gamma / d_scaled^(3/2)
  const double gamma = target_epsilon * std::pow(d_scaled, 1.5);
  const double soft = detail::transverse_softening(u);
  const double threshold = std::min(1.0, soft > 0 ? gamma_y / std::sqrt(soft) : 1.0);
  if (!(gamma < threshold)) {
    std::ostringstream os;
    os << "target epsilon " << target_epsilon << " needs gamma_z = " << gamma
       << ", beyond the zigzag threshold gamma_z < " << threshold << " for N=" << n_ions;
    throw ConfigError(os.str());
  }
  TrapConfig cfg{n_ions, gamma, gamma_y, n_buffer};
  const IonChain chain = solve_equilibrium(cfg);
  if (std::abs(chain.epsilon - target_epsilon) > 1e-4)
    throw NumericError("epsilon calibration failed to reproduce the target");
  return cfg;
}

/// epsilon = sqrt(e^2 / (4 pi eps0 d^3 m omega_x^2)) from physical inputs.
/// omega_x is an angular frequency in rad/s.
inline double epsilon_physical(double spacing_m, double mass_amu, double omega_x) {
  detail::require(spacing_m > 0 && mass_amu > 0 && omega_x > 0, "epsilon_physical needs positive inputs");
  const double m = mass_amu * si::atomic_mass_unit;
  return std::sqrt(si::coulomb_constant_e2 / (spacing_m * spacing_m * spacing_m * m * omega_x * omega_x));
}

/// l0 = (e^2 / 4 pi eps0 m omega_x^2)^(1/3) in meters.
inline double length_unit(double mass_amu, double omega_x) {
  const double m = mass_amu * si::atomic_mass_unit;
  return std::cbrt(si::coulomb_constant_e2 / (m * omega_x * omega_x));
}

/// Spacing d (meters) that gives the requested epsilon.
inline double spacing_for_epsilon(double epsilon, double mass_amu, double omega_x) {
  detail::require(epsilon > 0, "epsilon must be positive");
  return length_unit(mass_amu, omega_x) * std::pow(epsilon, -2.0 / 3.0);
}

struct SpacingReport {
  double mean = 0.0;
  double relative_std = 0.0;
  bool warn = false;  ///< relative_std above 10 %
};

/// Spread of nearest-neighbour distances among the non-buffer ions.
inline SpacingReport spacing_report(const IonChain& chain) {
  SpacingReport r;
  std::vector<double> d;
  for (int i = chain.config.n_buffer; i + 1 < chain.size() - chain.config.n_buffer; ++i)
    d.push_back(chain.positions[i + 1] - chain.positions[i]);
  if (d.empty()) return r;
  r.mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double var = 0.0;
  for (double x : d) var += (x - r.mean) * (x - r.mean);
  var /= d.size();
  r.relative_std = std::sqrt(var) / r.mean;
  r.warn = r.relative_std > 0.10;
  return r;
}

}  // namespace tweezer
