#pragma once

// Tweezer misadjustments (focus shifts, tilts, intensity errors) in the full
// 3N-dimensional model, and the adiabatic-switching excitation estimate.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/bands.hpp"
#include "tweezer/chain.hpp"
#include "tweezer/error.hpp"
#include "tweezer/gatekernel.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/phonons.hpp"

namespace tweezer {

// ---------------------------------------------------------------------------
// 3D potential. Coordinates are ordered (x_1..x_N, y_1..y_N, z_1..z_N).

/// Unit vector of a beam tilted from the y axis by polar angle theta with
/// azimuth phi measured in the x-z plane from x.
inline Eigen::Vector3d beam_axis(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi)};
}

/// Projector onto the plane orthogonal to the beam axis.
inline Eigen::Matrix3d beam_projector(double theta, double phi) {
  const Eigen::Vector3d b = beam_axis(theta, phi);
  return Eigen::Matrix3d::Identity() - b * b.transpose();
}

struct Potential3D {
  int n = 0;
  double gamma_y = 0.8, gamma_z = 0.05;
  std::vector<Eigen::Vector3d> anchor;   ///< tweezer focus positions r_i0 + delta_i
  std::vector<Eigen::Matrix3d> stiffness;  ///< nu0^2 (1 + dw)^2 Pi

  static Potential3D build(const IonChain& chain, const TweezerArray& tw, bool with_focus_shift = true) {
    tw.validate(chain.size());
    Potential3D v;
    v.n = chain.size();
    v.gamma_y = chain.config.gamma_y;
    v.gamma_z = chain.config.gamma_z;
    v.anchor.resize(v.n);
    v.stiffness.resize(v.n);
    for (int i = 0; i < v.n; ++i) {
      Misadjustment m;
      if (tw.misadjust) m = (*tw.misadjust)[i];
      const double w = tw.nu0[i] * (1.0 + m.dw);
      v.stiffness[i] = w * w * beam_projector(m.theta, m.phi);
      v.anchor[i] = Eigen::Vector3d(0.0, 0.0, chain.positions[i]);
      if (with_focus_shift) v.anchor[i] += Eigen::Vector3d(m.focus[0], m.focus[1], m.focus[2]);
    }
    return v;
  }

  Eigen::Vector3d ion(const Eigen::VectorXd& xi, int i) const { return {xi[i], xi[n + i], xi[2 * n + i]}; }

  Eigen::VectorXd gradient(const Eigen::VectorXd& xi) const {
    Eigen::VectorXd g(3 * n);
    const double k[3] = {1.0, gamma_y * gamma_y, gamma_z * gamma_z};
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d r = ion(xi, i);
      Eigen::Vector3d gi(k[0] * r[0], k[1] * r[1], k[2] * r[2]);
      gi += stiffness[i] * (r - anchor[i]);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const Eigen::Vector3d d = r - ion(xi, j);
        gi -= d / std::pow(d.norm(), 3);
      }
      for (int a = 0; a < 3; ++a) g[a * n + i] = gi[a];
    }
    return g;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& xi) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    const double k[3] = {1.0, gamma_y * gamma_y, gamma_z * gamma_z};
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        h(a * n + i, a * n + i) += k[a];
        for (int b = 0; b < 3; ++b) h(a * n + i, b * n + i) += stiffness[i](a, b);
      }
      const Eigen::Vector3d ri = ion(xi, i);
      for (int j = i + 1; j < n; ++j) {
        const Eigen::Vector3d d = ri - ion(xi, j);
        const double r = d.norm();
        const Eigen::Matrix3d c = (3.0 * d * d.transpose() - r * r * Eigen::Matrix3d::Identity()) / std::pow(r, 5);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            h(a * n + i, b * n + i) += c(a, b);
            h(a * n + j, b * n + j) += c(a, b);
            h(a * n + i, b * n + j) -= c(a, b);
            h(a * n + j, b * n + i) -= c(a, b);
          }
      }
    }
    return h;
  }

  /// Third-derivative contraction T[u, u] of the Coulomb energy.
  Eigen::VectorXd third_contract(const Eigen::VectorXd& xi, const Eigen::VectorXd& u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Eigen::Vector3d d = ion(xi, i) - ion(xi, j);
        const Eigen::Vector3d w = ion(u, i) - ion(u, j);
        const double r = d.norm(), dw = d.dot(w);
        const Eigen::Vector3d t =
            -15.0 * d * dw * dw / std::pow(r, 7) + 3.0 * (2.0 * dw * w + d * w.squaredNorm()) / std::pow(r, 5);
        for (int a = 0; a < 3; ++a) {
          out[a * n + i] += t[a];
          out[a * n + j] -= t[a];
        }
      }
    }
    return out;
  }
};

/// Equilibrium without tweezer forces: the linear chain on the z axis.
inline Eigen::VectorXd linear_configuration(const IonChain& chain) {
  const int n = chain.size();
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(3 * n);
  for (int i = 0; i < n; ++i) xi[2 * n + i] = chain.positions[i];
  return xi;
}

/// Direct nonlinear re-solve of the 3D equilibrium by Newton iteration.
inline Eigen::VectorXd perturbed_equilibrium(const IonChain& chain, const TweezerArray& tw, int max_iter = 50) {
  const Potential3D v = Potential3D::build(chain, tw);
  Eigen::VectorXd xi = linear_configuration(chain);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = v.gradient(xi);
    if (g.lpNorm<Eigen::Infinity>() < 1e-13) return xi;
    xi -= v.hessian(xi).ldlt().solve(g);
  }
  const double res = v.gradient(xi).lpNorm<Eigen::Infinity>();
  if (res > 1e-10) throw NumericError("perturbed equilibrium did not converge (residual " + std::to_string(res) + ")");
  return xi;
}

/// Second-order expansion of the equilibrium shift in the focus displacements:
/// X1 = -H^{-1} P at first order and -H^{-1} T[X1 d, X1 d] / 2 at second.
inline Eigen::VectorXd perturbative_equilibrium(const IonChain& chain, const TweezerArray& tw) {
  const Potential3D v = Potential3D::build(chain, tw);
  const Eigen::VectorXd xi0 = linear_configuration(chain);
  const int n = chain.size();
  const Eigen::MatrixXd h = v.hessian(xi0);
  // P delta: gradient change from shifting the anchors at fixed ions.
  Eigen::VectorXd pd = Eigen::VectorXd::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d shift = v.anchor[i] - Eigen::Vector3d(0.0, 0.0, chain.positions[i]);
    const Eigen::Vector3d f = -(v.stiffness[i] * shift);
    for (int a = 0; a < 3; ++a) pd[a * n + i] = f[a];
  }
  const auto ldlt = h.ldlt();
  const Eigen::VectorXd first = -ldlt.solve(pd);
  const Eigen::VectorXd second = -0.5 * ldlt.solve(v.third_contract(xi0, first));
  return xi0 + first + second;
}

/// All 3N modes at a configuration, restricted to the x components.
inline ModeSet misadjusted_modes(const IonChain& chain, const TweezerArray& tw, const Eigen::VectorXd& xi) {
  const Potential3D v = Potential3D::build(chain, tw);
  const PhononModes pm = modes_from_hessian(v.hessian(xi), Direction::x, false);
  const int n = chain.size();
  return ModeSet{pm.freqs, pm.mode_matrix.topRows(n)};
}

// ---------------------------------------------------------------------------
// Monte Carlo

enum class Channel : unsigned { focus = 1, tilt = 2, intensity = 4, combined = 7 };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::focus: return "focus";
    case Channel::tilt: return "tilt";
    case Channel::intensity: return "intensity";
    case Channel::combined: return "combined";
  }
  return "?";
}

inline Channel channel_from_string(const std::string& s) {
  if (s == "focus") return Channel::focus;
  if (s == "tilt") return Channel::tilt;
  if (s == "intensity") return Channel::intensity;
  if (s == "combined") return Channel::combined;
  throw ConfigError("unknown misadjustment channel '" + s + "'");
}

struct MisadjustSpec {
  double sigma = 0.0;
  Channel channel = Channel::combined;
  int realizations = 40;
  std::uint64_t seed = 1;
  double intensity_scale = 50.0;  ///< sigma applies to intensity_scale * dw
  bool perturbative = false;      ///< use the second-order equilibrium instead of the direct solve

  void validate() const {
    detail::require(sigma >= 0.0, "sigma must be non-negative");
    detail::require(realizations >= 1, "need at least one realization");
    detail::require(intensity_scale > 0.0, "intensity scale must be positive");
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Misadjustments of one realization; only pinned ions carry a tweezer.
inline std::vector<Misadjustment> draw_misadjustments(const TweezerArray& tw, const MisadjustSpec& spec, int index) {
  std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto has = [&](Channel c) { return (static_cast<unsigned>(spec.channel) & static_cast<unsigned>(c)) != 0; };
  std::vector<Misadjustment> out(tw.nu0.size());
  for (std::size_t i = 0; i < tw.nu0.size(); ++i) {
    // Always draw the full set so channels share the same random stream.
    const double n_dw = normal(rng), n_fx = normal(rng), n_fy = normal(rng), n_fz = normal(rng);
    const double n_th = normal(rng), n_ph = normal(rng);
    if (tw.nu0[i] == 0.0) continue;
    Misadjustment& m = out[i];
    if (has(Channel::intensity)) m.dw = spec.sigma * n_dw / spec.intensity_scale;
    if (has(Channel::focus)) m.focus = {spec.sigma * n_fx, spec.sigma * n_fy, spec.sigma * n_fz};
    if (has(Channel::tilt)) {
      m.theta = spec.sigma * n_th;
      m.phi = spec.sigma * n_ph;
    }
  }
  return out;
}

struct Realization {
  int index = 0;
  double deltaF = 0.0;
  double delta_chi = 0.0;
  bool stable = true;
};

struct MonteCarloResult {
  double mean_deltaF = 0.0, mean_delta_chi = 0.0;
  double se_deltaF = 0.0, se_delta_chi = 0.0;  ///< standard errors of the means
  int excluded = 0;
  std::vector<Realization> realizations;
};

/// Evaluates nominal schedules against misadjusted modes. Only the target
/// couplings are needed for delta_chi, so the full chi matrix is skipped.
inline MonteCarloResult misadjust_mc(const IonChain& chain, const TweezerArray& tw, const PulseSchedule& sched,
                                     const GateLayer& layer, const MisadjustSpec& spec, double n_th = 0.5,
                                     unsigned threads = 1) {
  spec.validate();
  layer.validate();
  MonteCarloResult out;
  out.realizations.resize(spec.realizations);
  parallel_for(out.realizations.size(), threads, [&](std::size_t r) {
    Realization& rz = out.realizations[r];
    rz.index = static_cast<int>(r);
    TweezerArray t = tw;
    t.misadjust = draw_misadjustments(tw, spec, static_cast<int>(r));
    try {
      const Eigen::VectorXd xi = spec.perturbative ? perturbative_equilibrium(chain, t) : perturbed_equilibrium(chain, t);
      const ModeSet modes = misadjusted_modes(chain, t, xi);
      const Eigen::MatrixXcd alpha = alpha_matrix(modes, sched);
      rz.deltaF = 0.8 * (2.0 * n_th + 1.0) * alpha.cwiseAbs2().sum() / layer.size();
      double dchi = 0.0;
      for (std::size_t g = 0; g < layer.pairs.size(); ++g)
        dchi += std::abs(chi_pair(modes, sched, layer.pairs[g].first, layer.pairs[g].second) - layer.target[g]);
      rz.delta_chi = 2.0 * dchi / layer.size();
    } catch (const NumericError&) {
      rz.stable = false;
    }
  });
  int used = 0;
  double sf = 0, sff = 0, sc = 0, scc = 0;
  for (const auto& rz : out.realizations) {
    if (!rz.stable) {
      ++out.excluded;
      continue;
    }
    ++used;
    sf += rz.deltaF;
    sff += rz.deltaF * rz.deltaF;
    sc += rz.delta_chi;
    scc += rz.delta_chi * rz.delta_chi;
  }
  if (used == 0) throw NumericError("every misadjustment realization was unstable");
  out.mean_deltaF = sf / used;
  out.mean_delta_chi = sc / used;
  if (used > 1) {
    out.se_deltaF = std::sqrt(std::max(0.0, (sff - used * out.mean_deltaF * out.mean_deltaF) / (used - 1)) / used);
    out.se_delta_chi = std::sqrt(std::max(0.0, (scc - used * out.mean_delta_chi * out.mean_delta_chi) / (used - 1)) / used);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adiabatic switching of the pinned pair from slots {1, 2} to {2, 3}

struct SwitchSpec {
  int p = 4;
  double epsilon = 0.07;
  double nu0 = 0.4;
  int k_points = 200;

  void validate() const {
    detail::require(p >= 3, "switching needs p >= 3");
    detail::require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
    detail::require(nu0 >= 0.0 && nu0 <= 1.0, "nu0 must lie in [0, 1]");
    detail::require(k_points >= 2, "k grid needs at least 2 points");
  }
};

struct SwitchResult {
  double prefactor = 0.0;  ///< K in P = K / (omega_x tau_s)^2
  double threshold = 0.0;  ///< sqrt(K)
  double k_x = 0.0, k_z = 0.0;
  double max_w_antisymmetry = 0.0;  ///< max |W^{12} + W^{21}|, zero by construction
};

/// W^{lambda lambda'} of slot i for bands n, n' at one k.
struct WBlock {
  double w11 = 0.0, w12 = 0.0, w21 = 0.0, w22 = 0.0;
};

inline WBlock w_block(const BandStructure& b, int kk, int n, int np, int slot) {
  const double a1 = b.xi1(kk, n, slot), a2 = b.xi2(kk, n, slot);
  const double b1 = b.xi1(kk, np, slot), b2 = b.xi2(kk, np, slot);
  WBlock w;
  w.w11 = w.w22 = a1 * b1 + a2 * b2;
  w.w12 = -a1 * b2 + a2 * b1;
  w.w21 = -w.w12;
  return w;
}

inline SwitchResult switching_prefactor(const SwitchSpec& spec) {
  spec.validate();
  SwitchResult out;
  const double nu2 = spec.nu0 * spec.nu0;
  for (Direction dir : {Direction::x, Direction::z}) {
    double sum = 0.0;
    for (int endpoint = 0; endpoint < 2; ++endpoint) {
      std::vector<double> pin(spec.p, 0.0);
      pin[endpoint] = nu2;
      pin[endpoint + 1] = nu2;
      const BandStructure b = band_structure_from(spec.p, spec.epsilon, dir, pin, spec.k_points);
      for (int kk = 0; kk < b.grid_size(); ++kk) {
        for (int n = 0; n < b.p; ++n) {
          for (int np = 0; np < b.p; ++np) {
            const WBlock w1 = w_block(b, kk, n, np, 0), w3 = w_block(b, kk, n, np, 2);
            out.max_w_antisymmetry = std::max(out.max_w_antisymmetry, std::abs(w1.w12 + w1.w21));
            const double nu = b.freqs(kk, n), nup = b.freqs(kk, np);
            const double pre = nu2 / (2.0 * std::sqrt(nu * nup));
            const double c11 = pre * (w3.w11 - w1.w11), c22 = pre * (w3.w22 - w1.w22);
            const double c12 = pre * (w3.w12 - w1.w12), c21 = pre * (w3.w21 - w1.w21);
            const double a = (c11 * c11 + c22 * c22 + c12 * c12 + c21 * c21) / std::pow(nu + nup, 4);
            sum += a * b.weight();
          }
        }
      }
    }
    (dir == Direction::x ? out.k_x : out.k_z) = 0.5 * sum;
  }
  out.prefactor = out.k_x + out.k_z;
  out.threshold = std::sqrt(out.prefactor);
  return out;
}

/// Excitation probability for switching time omega_x tau_s.
inline double switching_probability(const SwitchResult& r, double tau_s) {
  detail::require(tau_s > 0.0, "switching time must be positive");
  return r.prefactor / (tau_s * tau_s);
}

}  // namespace tweezer
