#pragma once

// Closed-form time integrals of products of trigonometric exponentials.
//
// Everything reduces to divided differences of z -> e^{iz}. phi1 and phi2 are
// the simplex averages
//   phi1(a, b)    = int_0^1 e^{i((1-s)a + s b)} ds
//   phi2(a, b, c) = int_{0<=y<=x<=1} e^{i(a + x(b-a) + y(c-b))} dy dx
// which stay finite for coincident nodes, so resonant (nu = mu) cases need no
// special branch.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace tweezer::integrals {

using cplx = std::complex<double>;

inline double sinc(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

inline cplx phi1(double a, double b) {
  return std::polar(sinc(0.5 * (b - a)), 0.5 * (a + b));
}

inline cplx phi2(double a, double b, double c) {
  std::array<double, 3> w{a, b, c};
  std::sort(w.begin(), w.end());
  const double spread = w[2] - w[0];
  if (spread > 0.5) return (phi1(w[1], w[2]) - phi1(w[0], w[1])) / cplx(0.0, spread);
  // Taylor series about the centre: sum_m i^m h_m(w - c) / (m + 2)!
  const double centre = 0.5 * (w[0] + w[2]);
  const double d0 = w[0] - centre, d1 = w[1] - centre, d2 = w[2] - centre;
  constexpr int terms = 22;
  double h0 = 1.0, h1 = 1.0, h2 = 1.0;  // complete homogeneous polynomials, one to three variables
  cplx sum(0.0, 0.0);
  cplx ipow(1.0, 0.0);
  double fact = 2.0;  // (m + 2)!
  for (int m = 0; m < terms; ++m) {
    if (m > 0) {
      h0 *= d0;
      h1 = h0 + d1 * h1;
      h2 = h1 + d2 * h2;
      ipow *= cplx(0.0, 1.0);
      fact *= (m + 2);
    }
    sum += ipow * (h2 / fact);
  }
  return std::polar(1.0, centre) * sum;
}

/// int_a^b e^{iwt} dt
inline cplx exp_integral(double w, double a, double b) { return (b - a) * phi1(w * a, w * b); }

/// int_a^b dt int_a^t dt' e^{ipt} e^{iqt'}
inline cplx nested_exp_integral(double p, double q, double a, double b) {
  const double h = b - a;
  return h * h * std::polar(1.0, (p + q) * a) * phi2(0.0, p * h, (p + q) * h);
}

/// g = int_a^b sin(mu t) e^{i nu t} dt
inline cplx segment_g(double mu, double nu, double a, double b) {
  const cplx d = exp_integral(nu + mu, a, b) - exp_integral(nu - mu, a, b);
  return d / cplx(0.0, 2.0);
}

/// int_a^b dt int_a^t dt' sin(mu1 t) sin(mu2 t') sin(nu (t - t'))
inline double nested_sin3(double mu1, double mu2, double nu, double a, double b) {
  // Expanding the three sines gives eight exponentials in conjugate pairs.
  double acc = 0.0;
  for (int s2 = -1; s2 <= 1; s2 += 2)
    for (int s3 = -1; s3 <= 1; s3 += 2)
      acc += s2 * s3 * nested_exp_integral(mu1 + s3 * nu, s2 * mu2 - s3 * nu, a, b).imag();
  return -0.25 * acc;
}

/// Same-piece kernel of the qubit-qubit coupling:
/// int_a^b dt int_a^t dt' [sin(mu1 t) sin(mu2 t') + sin(mu1 t') sin(mu2 t)] sin(nu (t - t')).
inline double same_piece_f(double mu1, double mu2, double nu, double a, double b) {
  return nested_sin3(mu1, mu2, nu, a, b) + nested_sin3(mu2, mu1, nu, a, b);
}

/// same_piece_f on the consecutive pieces [s h, (s + 1) h], s < pieces. The
/// nested integrals only depend on the offset through a phase, so the phi2
/// evaluations are shared between pieces.
inline std::vector<double> same_piece_f_pieces(double mu1, double mu2, double nu, double h, int pieces) {
  struct Term {
    double weight, w;  ///< prefactor and total frequency p + q
    cplx base;         ///< h^2 phi2(0, p h, (p + q) h)
  };
  std::vector<Term> terms;
  terms.reserve(8);
  for (int order = 0; order < 2; ++order) {
    const double m1 = order == 0 ? mu1 : mu2, m2 = order == 0 ? mu2 : mu1;
    for (int s2 = -1; s2 <= 1; s2 += 2)
      for (int s3 = -1; s3 <= 1; s3 += 2) {
        const double p = m1 + s3 * nu, q = s2 * m2 - s3 * nu;
        terms.push_back({-0.25 * s2 * s3, p + q, h * h * phi2(0.0, p * h, (p + q) * h)});
      }
  }
  std::vector<double> out(pieces, 0.0);
  for (int s = 0; s < pieces; ++s)
    for (const auto& t : terms) out[s] += t.weight * (std::polar(1.0, t.w * s * h) * t.base).imag();
  return out;
}

}  // namespace tweezer::integrals
