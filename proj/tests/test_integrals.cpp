#include <cmath>
#include <complex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "tweezer/integrals.hpp"

namespace {

using tweezer::integrals::cplx;
using boost::math::quadrature::gauss_kronrod;

// Adaptive 61-point Gauss-Kronrod, split into pieces short enough that the
// oscillations are resolved.
template <typename F>
double quad(F f, double a, double b) {
  const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / 2.0)));
  double sum = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double lo = a + (b - a) * k / pieces, hi = a + (b - a) * (k + 1) / pieces;
    sum += gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
  }
  return sum;
}

cplx quad_c(auto f, double a, double b) {
  return {quad([&](double t) { return f(t).real(); }, a, b), quad([&](double t) { return f(t).imag(); }, a, b)};
}

TEST(Integrals, Phi1MatchesQuadrature) {
  for (auto [a, b] : {std::pair{0.3, 2.1}, {1.0, 1.0}, {-4.0, 7.5}, {2.0, 2.0 + 1e-6}}) {
    const cplx ref = quad_c([&](double s) { return std::polar(1.0, (1 - s) * a + s * b); }, 0.0, 1.0);
    EXPECT_LT(std::abs(tweezer::integrals::phi1(a, b) - ref), 1e-12) << a << " " << b;
  }
}

TEST(Integrals, Phi2MatchesNestedQuadrature) {
  for (auto [a, b, c] : {std::tuple{0.1, 0.7, 1.9}, {1.0, 1.0, 1.0}, {0.0, 3.0, -2.0}, {0.5, 0.5 + 1e-3, 0.6}}) {
    const cplx ref = quad_c(
        [&](double x) {
          return quad_c([&](double y) { return std::polar(1.0, a + x * (b - a) + y * (c - b)); }, 0.0, x);
        },
        0.0, 1.0);
    EXPECT_LT(std::abs(tweezer::integrals::phi2(a, b, c) - ref), 1e-12) << a << " " << b << " " << c;
  }
}

TEST(Integrals, SegmentGAgainstQuadrature) {
  for (auto [mu, nu] : {std::pair{1.05, 0.98}, {1.0, 1.0}, {0.9, 1.1}}) {
    const double a = 12.0, b = 60.0;
    const cplx ref = quad_c([&](double t) { return std::sin(mu * t) * std::polar(1.0, nu * t); }, a, b);
    EXPECT_LT(std::abs(tweezer::integrals::segment_g(mu, nu, a, b) - ref), 1e-10);
  }
}

TEST(Integrals, SamePieceKernelAgainstDoubleQuadrature) {
  for (auto [m1, m2, nu] : {std::tuple{1.06, 1.06, 1.02}, {1.0, 0.97, 1.0}, {1.1, 1.05, 0.95}}) {
    const double a = 5.0, b = 25.0;
    const double ref = quad(
        [&](double t) {
          return quad(
              [&](double tp) {
                return (std::sin(m1 * t) * std::sin(m2 * tp) + std::sin(m1 * tp) * std::sin(m2 * t)) *
                       std::sin(nu * (t - tp));
              },
              a, t);
        },
        a, b);
    EXPECT_NEAR(tweezer::integrals::same_piece_f(m1, m2, nu, a, b), ref, 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Integrals, SharedPiecesMatchPerPieceFormula) {
  const double h = 187.5;
  const auto v = tweezer::integrals::same_piece_f_pieces(1.07, 1.04, 1.05, h, 8);
  for (int s = 0; s < 8; ++s) {
    const double ref = tweezer::integrals::same_piece_f(1.07, 1.04, 1.05, s * h, (s + 1) * h);
    EXPECT_NEAR(v[s], ref, 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

}  // namespace
