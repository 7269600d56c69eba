#include <cmath>
#include <complex>

#include <algorithm>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <gtest/gtest.h>

#include "tweezer/chain.hpp"
#include "tweezer/design.hpp"
#include "tweezer/gatekernel.hpp"

namespace {

using namespace tweezer;
using boost::math::quadrature::gauss;

// Fixed-order Gauss-Legendre on pieces no longer than 0.5 that never straddle
// a breakpoint, so the piecewise-constant drive is integrated exactly.
std::vector<double> breakpoints(const PulseSchedule& s) {
  std::vector<double> c{0.0, s.duration};
  for (int i = 0; i < s.ions(); ++i)
    for (int k = 1; k <= s.segments; ++k) c.push_back(s.window_of(i) * k / s.segments);
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

template <typename F>
double quad(F f, double a, double b, const std::vector<double>& cuts) {
  std::vector<double> pts{a};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  pts.push_back(b);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const int n = std::max(1, static_cast<int>(std::ceil((pts[k + 1] - pts[k]) / 0.5)));
    for (int m = 0; m < n; ++m) {
      const double lo = pts[k] + (pts[k + 1] - pts[k]) * m / n, hi = pts[k] + (pts[k + 1] - pts[k]) * (m + 1) / n;
      sum += gauss<double, 20>::integrate(f, lo, hi);
    }
  }
  return sum;
}

ModeSet two_mode_set() {
  ModeSet m;
  m.freqs = Eigen::Vector2d(1.0, 0.98);
  m.vectors.resize(2, 2);
  m.vectors << 1, 1, 1, -1;
  m.vectors /= std::sqrt(2.0);
  return m;
}

PulseSchedule sample_schedule(double duration = 40.0) {
  PulseSchedule s = PulseSchedule::empty(2, duration, 3);
  Eigen::VectorXd r0(3), r1(3);
  r0 << 0.02, -0.01, 0.03;
  r1 << -0.015, 0.025, 0.01;
  s.set_ion(0, 0.97, r0);
  s.set_ion(1, 1.04, r1, 0.775 * duration);  // shorter window exercises the common refinement
  return s;
}

double drive(const PulseSchedule& s, int i, double t) {
  const double w = s.window_of(i);
  if (t >= w) return 0.0;  // quadrature nodes never sit on an edge
  const int seg = std::min(s.segments - 1, static_cast<int>(t / (w / s.segments)));
  return s.amplitude[i][seg] * std::sin(s.mu[i] * t);
}

TEST(Kernel, AlphaMatchesQuadrature) {
  const ModeSet m = two_mode_set();
  const PulseSchedule s = sample_schedule();
  const Eigen::MatrixXcd a = alpha_matrix(m, s);
  const auto cuts = breakpoints(s);
  for (int i = 0; i < 2; ++i)
    for (int n = 0; n < 2; ++n) {
      const double nu = m.freqs[n];
      const double re = quad([&](double t) { return drive(s, i, t) * std::cos(nu * t); }, 0.0, s.duration, cuts);
      const double im = quad([&](double t) { return drive(s, i, t) * std::sin(nu * t); }, 0.0, s.duration, cuts);
      const std::complex<double> ref = std::complex<double>(0, -1) * (m.vectors(i, n) / std::sqrt(nu)) *
                                       std::complex<double>(re, im);
      EXPECT_LT(std::abs(a(i, n) - ref), 1e-10);
    }
}

TEST(Kernel, ChiMatchesDoubleQuadrature) {
  // Short layer keeps the nested quadrature cheap.
  const ModeSet m = two_mode_set();
  const PulseSchedule s = sample_schedule(12.0);
  const auto cuts = breakpoints(s);
  double ref = 0.0;
  for (int n = 0; n < 2; ++n) {
    const double nu = m.freqs[n];
    const double w = m.vectors(0, n) * m.vectors(1, n) / nu;
    ref += w * quad(
                   [&](double t) {
                     return quad(
                         [&](double tp) {
                           return (drive(s, 0, t) * drive(s, 1, tp) + drive(s, 0, tp) * drive(s, 1, t)) *
                                  std::sin(nu * (t - tp));
                         },
                         0.0, t, cuts);
                   },
                   0.0, s.duration, cuts);
  }
  EXPECT_NEAR(chi_pair(m, s, 0, 1), ref, 1e-10 * std::max(1.0, std::abs(ref)));
}

TEST(Kernel, ChiScalesQuadratically) {
  const ModeSet m = two_mode_set();
  PulseSchedule s = sample_schedule();
  const double chi = chi_pair(m, s, 0, 1);
  for (double lam : {0.5, 2.0, -3.0}) {
    PulseSchedule t = s;
    for (auto& r : t.amplitude) r *= lam;
    EXPECT_NEAR(chi_pair(m, t, 0, 1), lam * lam * chi, 1e-14 * std::abs(chi) * lam * lam);
    PulseSchedule u = s;
    u.amplitude[0] *= lam;
    EXPECT_NEAR(chi_pair(m, u, 0, 1), lam * chi, 1e-14 * std::abs(chi * lam));
  }
}

TEST(Kernel, ChiIsSymmetricInIons) {
  const ModeSet m = two_mode_set();
  const PulseSchedule s = sample_schedule();
  PulseSchedule sw = PulseSchedule::empty(2, s.duration, s.segments);
  sw.set_ion(0, s.mu[1], s.amplitude[1], s.window[1]);
  sw.set_ion(1, s.mu[0], s.amplitude[0], s.window[0]);
  EXPECT_NEAR(chi_pair(m, s, 0, 1), chi_pair(m, sw, 0, 1), 1e-15);
}

TEST(Kernel, PhiMatrixReproducesAlpha) {
  const ModeSet m = two_mode_set();
  const PulseSchedule s = sample_schedule();
  const Eigen::MatrixXcd a = alpha_matrix(m, s);
  const Eigen::MatrixXd phi = phi_matrix(m, 0, s.mu[0], s.window_of(0), s.segments, 0.5);
  EXPECT_NEAR(s.amplitude[0].dot(phi * s.amplitude[0]), 0.8 * 2.0 * a.row(0).cwiseAbs2().sum(), 1e-15);
}

TEST(Metrics, CountsCrosstalkOutsideTargets) {
  Eigen::MatrixXd chi = Eigen::MatrixXd::Zero(4, 4);
  chi(0, 1) = chi(1, 0) = -0.78;
  chi(2, 3) = chi(3, 2) = -0.79;
  chi(1, 2) = chi(2, 1) = 0.01;
  chi(0, 3) = chi(3, 0) = -0.002;
  GateLayer layer{{{0, 1}, {2, 3}}, {-std::numbers::pi / 4, -std::numbers::pi / 4}};
  const GateReport r = metrics(Eigen::MatrixXcd::Zero(4, 2), chi, layer);
  EXPECT_NEAR(r.crosstalk, 2.0 / 2 * 0.012, 1e-15);
  EXPECT_NEAR(r.delta_chi, 2.0 / 2 * (std::abs(-0.78 + std::numbers::pi / 4) + std::abs(-0.79 + std::numbers::pi / 4)),
              1e-15);
  EXPECT_EQ(r.deltaF, 0.0);
  const GateReport masked = metrics(Eigen::MatrixXcd::Zero(4, 2), chi, layer, 0.5, {true, true, true, false});
  EXPECT_NEAR(masked.crosstalk, 0.01, 1e-15);
}

TEST(Metrics, RejectsOverlappingPairs) {
  GateLayer layer{{{0, 1}, {1, 2}}, {0.5, 0.5}};
  EXPECT_THROW(layer.validate(), ConfigError);
}

TEST(Kernel, InfiniteChainMatchesLongFiniteRing) {
  // Central pair of a long uniformly spaced pinned chain converges to the
  // infinite-lattice response of the same pulse.
  CellConfig cell;
  const BandStructure bands = band_structure(cell, 400);
  const double mu = 1.064, tau = 600.0;
  PeriodicSchedule ps = PeriodicSchedule::empty(6, 1, tau, 1);
  for (int slot : {0, 1}) {
    ps.mu[slot] = mu;
    ps.amplitude[slot] = Eigen::VectorXd::Constant(1, 0.004);
  }
  PeriodicLayer pl{{{0, 1}}, {-0.0}};
  const InfiniteReport inf = evaluate_periodic(bands, ps, pl, 0.5, 40);

  // Finite chain with exact 1/d spacing (positions placed by hand).
  const int n = 600;
  IonChain chain;
  chain.config = TrapConfig{n, 0.01, 0.8, 0};
  const double d = std::pow(cell.epsilon, -2.0 / 3.0);
  for (int i = 0; i < n; ++i) chain.positions.push_back(d * (i - n / 2));
  std::vector<double> nu0(n, 0.0);
  for (int i = 0; i < n; i += 6) nu0[i] = nu0[i + 1] = cell.nu0;
  PhononModes pm = modes_from_hessian(hessian(chain, TweezerArray{nu0, std::nullopt}, Direction::x), Direction::x,
                                      false);
  // Remove the missing axial trap's effect: the Hessian above already has
  // trap 1 and Coulomb sums, only truncated at the ends.
  const ModeSet m = pm.as_mode_set();
  PulseSchedule s = PulseSchedule::empty(n, tau, 1);
  const int c = n / 2;
  s.set_ion(c, mu, Eigen::VectorXd::Constant(1, 0.004));
  s.set_ion(c + 1, mu, Eigen::VectorXd::Constant(1, 0.004));
  const Eigen::MatrixXcd a = alpha_matrix(m, s);
  const double alpha_sq = a.cwiseAbs2().sum();
  EXPECT_NEAR(alpha_sq, inf.ion_alpha_sq[0] + inf.ion_alpha_sq[1], 2e-3 * alpha_sq);
  EXPECT_NEAR(chi_pair(m, s, c, c + 1), inf.report.chi(0, 1), 2e-3 * std::abs(inf.report.chi(0, 1)));
}

}  // namespace
