#pragma once

// Brute-force propagation of the spin-phonon coupling for two ions in a
// truncated Fock space. Used as an independent check of the closed-form
// alpha / chi / infidelity pipeline on tiny systems.
//
// sigma^x_i commute, so in the sigma^x eigenbasis every spin configuration s
// drives each mode independently with force sum_i s_i f_i^n(t). Each mode and
// configuration is integrated with RK4 in the interaction picture,
//   H = f(t) (a^dag e^{i nu t} + a e^{-i nu t}),  f = sum_i s_i R_i(t) sin(mu_i t) M_i^n / sqrt(nu).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/error.hpp"
#include "tweezer/gatekernel.hpp"

namespace tweezer {

struct FockOracleSpec {
  int fock_dim = 40;     ///< truncated Hilbert space per mode
  int max_initial = 12;  ///< highest thermal Fock state propagated
  double n_th = 0.0;
  double dt = 0.02;      ///< upper bound on the RK4 step (1/omega_x)

  void validate() const {
    detail::require(fock_dim >= 12, "Fock truncation must be at least 12");
    detail::require(max_initial >= 0 && max_initial < fock_dim, "max_initial must lie below the truncation");
    detail::require(n_th >= 0.0 && n_th <= 1.0, "oracle supports thermal occupation in [0, 1]");
    detail::require(dt > 0.0, "dt must be positive");
  }
};

struct FockOracleResult {
  double chi = 0.0;                ///< coupling extracted from the geometric phases
  double fidelity = 0.0;           ///< state-averaged fidelity against exp(i chi0 sx sx)
  double entanglement_fidelity = 0.0;
  double top_population = 0.0;     ///< largest population reached in the top Fock level
  Eigen::Matrix4cd channel;        ///< spin coherence factors E(s, s'), s = (+,+), (+,-), (-,+), (-,-)
};

namespace detail {

using CVec = Eigen::VectorXcd;

/// dpsi/dt = -i f (a^dag e^{i nu t} + a e^{-i nu t}) psi
inline void fock_rhs(const CVec& psi, double f, double nu, double t, CVec& out) {
  const int d = static_cast<int>(psi.size());
  const std::complex<double> up = std::polar(f, nu * t);  // coefficient of a^dag
  const std::complex<double> down = std::conj(up);        // coefficient of a
  const std::complex<double> mi(0.0, -1.0);
  for (int k = 0; k < d; ++k) {
    std::complex<double> v = 0.0;
    if (k > 0) v += up * std::sqrt(static_cast<double>(k)) * psi[k - 1];
    if (k + 1 < d) v += down * std::sqrt(static_cast<double>(k + 1)) * psi[k + 1];
    out[k] = mi * v;
  }
}

}  // namespace detail

/// Propagates both ions of `sched` through every mode of `modes` and compares
/// the resulting spin channel with exp(i chi0 sigma^x_0 sigma^x_1).
inline FockOracleResult fock_oracle(const ModeSet& modes, const PulseSchedule& sched, double chi0,
                                    const FockOracleSpec& spec = {}) {
  spec.validate();
  sched.validate();
  detail::require(modes.ions() == 2 && sched.ions() == 2, "Fock oracle handles exactly two ions");
  detail::require(modes.modes() >= 1 && modes.modes() <= 2, "Fock oracle handles one or two modes");

  // Time grid aligned with every segment boundary.
  std::vector<double> cuts{0.0, sched.duration};
  for (int i = 0; i < 2; ++i) {
    const auto e = kernel::segment_edges(sched.window_of(i), sched.segments);
    cuts.insert(cuts.end(), e.begin(), e.end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             cuts.end());

  auto amplitude = [&](int i, double t) {
    if (!sched.addressed(i)) return 0.0;
    const double win = sched.window_of(i);
    if (t >= win) return 0.0;
    const int s = std::min(sched.segments - 1, static_cast<int>(t / (win / sched.segments)));
    return sched.amplitude[i][s];
  };

  const std::array<std::array<int, 2>, 4> configs{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  const int d = spec.fock_dim;

  // Thermal weights over the propagated initial states, renormalized.
  std::vector<double> weight(spec.max_initial + 1);
  double wsum = 0.0;
  for (int k = 0; k <= spec.max_initial; ++k) {
    weight[k] = spec.n_th == 0.0 ? (k == 0 ? 1.0 : 0.0)
                                 : std::pow(spec.n_th, k) / std::pow(spec.n_th + 1.0, k + 1);
    wsum += weight[k];
  }
  for (double& w : weight) w /= wsum;
  int k_hi = 0;
  for (int k = 0; k <= spec.max_initial; ++k)
    if (weight[k] > 1e-14) k_hi = k;

  FockOracleResult res;
  res.channel = Eigen::Matrix4cd::Ones();
  std::array<double, 4> phase{};

  for (int n = 0; n < modes.modes(); ++n) {
    const double nu = modes.freqs[n];
    const std::array<double, 2> m{modes.vectors(0, n) / std::sqrt(nu), modes.vectors(1, n) / std::sqrt(nu)};
    // final[c][k] = U_c |k>
    std::vector<std::vector<detail::CVec>> final(4, std::vector<detail::CVec>(k_hi + 1));
    for (int c = 0; c < 4; ++c) {
      for (int k = 0; k <= k_hi; ++k) {
        detail::CVec psi = detail::CVec::Zero(d), k1(d), k2(d), k3(d), k4(d), tmp(d);
        psi[k] = 1.0;
        for (std::size_t piece = 0; piece + 1 < cuts.size(); ++piece) {
          const double t0 = cuts[piece], t1 = cuts[piece + 1];
          const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / spec.dt)));
          const double h = (t1 - t0) / steps;
          // Amplitudes are constant inside a piece; evaluate them at its midpoint.
          const double mid = 0.5 * (t0 + t1);
          std::array<double, 2> r{amplitude(0, mid), amplitude(1, mid)};
          auto f_at = [&](double t) {
            double f = 0.0;
            for (int i = 0; i < 2; ++i) f += configs[c][i] * m[i] * r[i] * std::sin(sched.mu[i] * t);
            return f;
          };
          for (int st = 0; st < steps; ++st) {
            const double t = t0 + st * h;
            detail::fock_rhs(psi, f_at(t), nu, t, k1);
            tmp = psi + 0.5 * h * k1;
            detail::fock_rhs(tmp, f_at(t + 0.5 * h), nu, t + 0.5 * h, k2);
            tmp = psi + 0.5 * h * k2;
            detail::fock_rhs(tmp, f_at(t + 0.5 * h), nu, t + 0.5 * h, k3);
            tmp = psi + h * k3;
            detail::fock_rhs(tmp, f_at(t + h), nu, t + h, k4);
            psi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            res.top_population = std::max(res.top_population, std::norm(psi[d - 1]));
          }
        }
        final[c][k] = psi;
      }
      // Geometric phase from the vacuum: U_c |0> = e^{i phi} |beta>.
      const detail::CVec& v = final[c][0];
      std::complex<double> beta = 0.0;
      for (int q = 0; q + 1 < d; ++q) beta += std::conj(v[q]) * std::sqrt(static_cast<double>(q + 1)) * v[q + 1];
      std::complex<double> overlap = 0.0, coeff = std::exp(-0.5 * std::norm(beta));
      for (int q = 0; q < d; ++q) {
        overlap += std::conj(coeff) * v[q];
        coeff *= beta / std::sqrt(static_cast<double>(q + 1));
      }
      phase[c] += std::arg(overlap);
    }
    for (int c = 0; c < 4; ++c)
      for (int cp = 0; cp < 4; ++cp) {
        std::complex<double> t = 0.0;
        for (int k = 0; k <= k_hi; ++k) t += weight[k] * final[cp][k].dot(final[c][k]);
        res.channel(c, cp) *= t;
      }
  }
  if (res.top_population > 1e-8)
    throw NumericError("Fock truncation too small: top-level population " + std::to_string(res.top_population));

  auto wrap = [](double x) { return std::remainder(x, 2.0 * std::numbers::pi); };
  res.chi = wrap(phase[0] + phase[3] - phase[1] - phase[2]) / 4.0;

  std::complex<double> fe = 0.0;
  for (int c = 0; c < 4; ++c)
    for (int cp = 0; cp < 4; ++cp) {
      const double p0 = chi0 * configs[c][0] * configs[c][1], p1 = chi0 * configs[cp][0] * configs[cp][1];
      fe += res.channel(c, cp) * std::polar(1.0, -(p0 - p1));
    }
  res.entanglement_fidelity = fe.real() / 16.0;
  res.fidelity = (4.0 * res.entanglement_fidelity + 1.0) / 5.0;
  return res;
}

}  // namespace tweezer
