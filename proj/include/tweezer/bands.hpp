#pragma once

// Bloch modes of an infinite, uniformly spaced chain with a period-p tweezer
// array. Lengths in units of the spacing d enter only through eps^2 = (l0/d)^3.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/error.hpp"
#include "tweezer/phonons.hpp"

namespace tweezer {

using cplx = std::complex<double>;

inline constexpr double zeta3 = 1.2020569031595942854;
inline constexpr double zeta5 = 1.0369277551433699263;

struct CellConfig {
  int p = 6;
  std::vector<int> pinned_slots{0, 1};  ///< zero-based slot indices
  double nu0 = 0.4;
  double epsilon = 0.07;
  Direction direction = Direction::x;
  double gamma_y = 0.8;  ///< used only for the y direction

  void validate() const {
    detail::require(p >= 3, "unit cell size p must be >= 3");
    detail::require(pinned_slots.size() >= 2 && static_cast<int>(pinned_slots.size()) <= p,
                    "need between 2 and p pinned slots");
    for (int s : pinned_slots) detail::require(s >= 0 && s < p, "pinned slot outside the unit cell");
    detail::require(nu0 >= 0.0 && nu0 <= 1.0, "nu0 must lie in [0, 1]");
    detail::require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  }

  /// Per-slot nu0^2.
  std::vector<double> pin_squared() const {
    std::vector<double> w(p, 0.0);
    for (int s : pinned_slots) w[s] = nu0 * nu0;
    return w;
  }
};

/// Lattice cut-off L with eps^2 / (p^3 L^2) < tol.
inline long lattice_cutoff(int p, double epsilon, double tol = 1e-12) {
  const double l = std::sqrt(epsilon * epsilon / (static_cast<double>(p) * p * p * tol));
  return std::max<long>(4, static_cast<long>(std::ceil(l)));
}

/// J^k_i = eps^2 sum_l e^{-ikl} / |pl + i|^3 for i = 0..p-1, truncated at |l| <= L.
inline std::vector<cplx> coupling_fourier_all(int p, double epsilon, double k, long cutoff = -1) {
  const long L = cutoff > 0 ? cutoff : lattice_cutoff(p, epsilon);
  // phases[l] = e^{-ikl}, by recurrence with periodic resynchronization
  std::vector<cplx> phases(static_cast<std::size_t>(L) + 1);
  const cplx step = std::polar(1.0, -k);
  cplx ph(1.0, 0.0);
  for (long l = 0; l <= L; ++l) {
    phases[static_cast<std::size_t>(l)] = ph;
    ph = ((l & 63) == 63) ? std::polar(1.0, -k * static_cast<double>(l + 1)) : ph * step;
  }
  std::vector<cplx> j(p, cplx(0.0, 0.0));
  for (int i = 0; i < p; ++i) {
    cplx acc(0.0, 0.0);
    // smallest terms first
    for (long l = L; l >= 1; --l) {
      const double up = static_cast<double>(p) * l + i;  // pl + i, l > 0
      const double dn = static_cast<double>(p) * l - i;  // |p(-l) + i|
      const cplx e = phases[static_cast<std::size_t>(l)];
      acc += e / (up * up * up) + std::conj(e) / (dn * dn * dn);
    }
    if (i != 0) acc += 1.0 / (static_cast<double>(i) * i * i);
    j[i] = epsilon * epsilon * acc;
  }
  return j;
}

/// J^k_i for any integer slot offset i (negative offsets via Hermiticity).
inline cplx coupling_fourier(int p, double epsilon, int i, double k, long cutoff = -1) {
  // i = pq + r with 0 <= r < p; shifting l gives J_{pq+r} = e^{ikq} J_r
  const int q = (i >= 0) ? i / p : -((-i + p - 1) / p);
  const int r = i - q * p;
  const auto all = coupling_fourier_all(p, epsilon, k, cutoff);
  return all[r] * std::polar(1.0, k * q);
}

/// The p x p Hermitian matrix v^k for per-slot pinning nu0^2 values.
inline Eigen::MatrixXcd band_matrix(int p, double epsilon, Direction dir, const std::vector<double>& pin2,
                                    double k, double gamma_y = 0.8) {
  const auto j = coupling_fourier_all(p, epsilon, k);
  const double s = coulomb_sign(dir);
  double trap2 = 1.0;
  if (dir == Direction::y) trap2 = gamma_y * gamma_y;
  if (dir == Direction::z) trap2 = 0.0;  // no axial confinement in the uniform infinite chain
  Eigen::MatrixXcd v(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      const int d = a - b;
      const cplx jab = d >= 0 ? j[d] : std::conj(j[-d]);
      v(a, b) = s * jab;
    }
    v(a, a) += trap2 - s * 2.0 * epsilon * epsilon * zeta3 + (dir == Direction::y ? 0.0 : pin2[a]);
  }
  return v;
}

struct BandStructure {
  int p = 0;
  Direction direction = Direction::x;
  std::vector<double> k;                  ///< midpoint grid on [0, pi]
  Eigen::MatrixXd freqs;                  ///< (K, p), descending per k
  std::vector<Eigen::MatrixXcd> vectors;  ///< per k: column n is B^{k,n}

  int grid_size() const { return static_cast<int>(k.size()); }
  double weight() const { return 1.0 / (2.0 * grid_size()); }  ///< dk / 2 pi per grid point

  /// Xi^{k,n,1}_i = Re B, Xi^{k,n,2}_i = Im B.
  double xi1(int kk, int n, int i) const { return vectors[kk](i, n).real(); }
  double xi2(int kk, int n, int i) const { return vectors[kk](i, n).imag(); }

  double band_mean(int n) const { return freqs.col(n).mean(); }
  double band_width(int n) const { return freqs.col(n).maxCoeff() - freqs.col(n).minCoeff(); }
};

namespace detail {

inline void fix_phase(Eigen::Ref<Eigen::VectorXcd> v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  const double a = std::abs(v[idx]);
  if (a > 0) v *= std::conj(v[idx]) / a;
}

}  // namespace detail

inline BandStructure band_structure_from(int p, double epsilon, Direction dir, const std::vector<double>& pin2,
                                         int K, double gamma_y = 0.8) {
  detail::require(K >= 2, "k grid needs at least 2 points");
  BandStructure b;
  b.p = p;
  b.direction = dir;
  b.k.resize(K);
  b.freqs.resize(K, p);
  b.vectors.resize(K);
  for (int kk = 0; kk < K; ++kk) {
    const double k = std::numbers::pi * (kk + 0.5) / K;
    b.k[kk] = k;
    const Eigen::MatrixXcd v = band_matrix(p, epsilon, dir, pin2, k, gamma_y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(v);
    if (es.info() != Eigen::Success) throw NumericError("band diagonalization failed");
    Eigen::MatrixXcd vec(p, p);
    for (int n = 0; n < p; ++n) {
      const double lam = es.eigenvalues()[p - 1 - n];
      if (lam <= 0.0) throw NumericError("imaginary band frequency: chain unstable at this pinning");
      b.freqs(kk, n) = std::sqrt(lam);
      vec.col(n) = es.eigenvectors().col(p - 1 - n);
      detail::fix_phase(vec.col(n));
    }
    b.vectors[kk] = vec;
  }
  return b;
}

/// Bands of the configured cell on a K-point midpoint grid, sorted descending.
inline BandStructure band_structure(const CellConfig& cfg, int K = 200) {
  cfg.validate();
  return band_structure_from(cfg.p, cfg.epsilon, cfg.direction, cfg.pin_squared(), K, cfg.gamma_y);
}

/// Flat-band (p -> infinity) COM and stretch frequencies.
inline std::pair<double, double> flat_band_frequencies(double epsilon, double nu0) {
  const double base = 1.0 - 2.0 * epsilon * epsilon * zeta3 + nu0 * nu0;
  return {std::sqrt(base + epsilon * epsilon), std::sqrt(base - epsilon * epsilon)};
}

struct BandWidths {
  double com = 0.0;
  double stretch = 0.0;
};

/// Strong-pinning widths. Re Li_s(e^{ik}) runs monotonically from zeta(s) at
/// k = 0 to -(1 - 2^{1-s}) zeta(s) at k = pi.
inline BandWidths perturbative_bandwidths(const CellConfig& cfg) {
  const double p = cfg.p;
  const double e2 = cfg.epsilon * cfg.epsilon;
  const double base = 1.0 - 2.0 * e2 * zeta3 + cfg.nu0 * cfg.nu0;
  const double li3_max = zeta3, li3_min = -0.75 * zeta3;
  const double li5_max = zeta5, li5_min = -(15.0 / 16.0) * zeta5;
  const double c3 = 4.0 / (p * p * p), c5 = 12.0 / (p * p * p * p * p);
  BandWidths w;
  w.com = std::sqrt(base + e2 * (1.0 + c3 * li3_max)) - std::sqrt(base + e2 * (1.0 + c3 * li3_min));
  w.stretch = std::sqrt(base - e2 * (1.0 + c5 * li5_min)) - std::sqrt(base - e2 * (1.0 + c5 * li5_max));
  return w;
}

/// Widths of the COM and stretch bands of the pinned 2 x 2 block of v^k alone,
/// i.e. with the couplings to unpinned ions dropped. This is exact in 1/p and
/// differs from the full bands at order epsilon^4 / nu0^2.
inline BandWidths pinned_block_bandwidths(const CellConfig& cfg, int K = 400) {
  cfg.validate();
  detail::require(K >= 2, "k grid needs at least 2 points");
  const int a = cfg.pinned_slots[0], b = cfg.pinned_slots[1];
  std::vector<double> pin2(cfg.p, 0.0);
  for (int s : cfg.pinned_slots) pin2[s] = cfg.nu0 * cfg.nu0;
  double cmax = -1e300, cmin = 1e300, smax = -1e300, smin = 1e300;
  for (int kk = 0; kk < K; ++kk) {
    const double k = std::numbers::pi * (kk + 0.5) / K;
    const Eigen::MatrixXcd v = band_matrix(cfg.p, cfg.epsilon, cfg.direction, pin2, k, cfg.gamma_y);
    Eigen::Matrix2cd blk;
    blk << v(a, a), v(a, b), v(b, a), v(b, b);
    const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(blk, Eigen::EigenvaluesOnly).eigenvalues();
    const double hi = std::sqrt(ev[1]), lo = std::sqrt(ev[0]);
    cmax = std::max(cmax, hi);
    cmin = std::min(cmin, hi);
    smax = std::max(smax, lo);
    smin = std::min(smin, lo);
  }
  return {cmax - cmin, smax - smin};
}

/// Leading-order eigenvectors of the pinned 2 x 2 block: columns COM, stretch.
inline Eigen::Matrix2d perturbative_com_stretch_vectors() {
  Eigen::Matrix2d x;
  x << 1.0, 1.0, 1.0, -1.0;
  return x / std::sqrt(2.0);
}

}  // namespace tweezer
