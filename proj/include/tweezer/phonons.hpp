#pragma once

// Transverse and axial normal modes of a finite chain with optical tweezers.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tweezer/chain.hpp"
#include "tweezer/error.hpp"

namespace tweezer {

enum class Direction { x, y, z };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::x: return "x";
    case Direction::y: return "y";
    case Direction::z: return "z";
  }
  return "?";
}

inline Direction direction_from_string(const std::string& s) {
  if (s == "x") return Direction::x;
  if (s == "y") return Direction::y;
  if (s == "z") return Direction::z;
  throw ConfigError("unknown direction '" + s + "' (expected x, y or z)");
}

/// Coupling sign s_alpha of the Coulomb term.
inline double coulomb_sign(Direction d) { return d == Direction::z ? -2.0 : 1.0; }

struct Misadjustment {
  double dw = 0.0;                          ///< relative frequency shift delta_omega / omega_0
  std::array<double, 3> focus{0, 0, 0};     ///< focus displacement (x, y, z) in l0
  double theta = 0.0;                       ///< beam tilt angles (radians)
  double phi = 0.0;
};

struct TweezerArray {
  std::vector<double> nu0;                       ///< omega_0,i / omega_x, 0 for unpinned
  std::optional<std::vector<Misadjustment>> misadjust;

  static TweezerArray none(int n) { return TweezerArray{std::vector<double>(n, 0.0), std::nullopt}; }

  void validate(int n) const {
    detail::require(static_cast<int>(nu0.size()) == n, "tweezer array size must match the chain");
    for (double v : nu0) detail::require(v >= 0.0 && v <= 1.0, "nu0 must lie in [0, 1]");
    if (misadjust) detail::require(static_cast<int>(misadjust->size()) == n, "misadjustment list size must match the chain");
  }
};

/// Normal modes restricted to the coordinates the lasers couple to.
/// `vectors(i, n)` is the component of mode n on ion i.
struct ModeSet {
  Eigen::VectorXd freqs;
  Eigen::MatrixXd vectors;

  int ions() const { return static_cast<int>(vectors.rows()); }
  int modes() const { return static_cast<int>(freqs.size()); }
};

struct PhononModes {
  Direction direction = Direction::x;
  Eigen::VectorXd freqs;        ///< nu_n = omega_n / omega_x
  Eigen::MatrixXd mode_matrix;  ///< column n is mode n, row i is ion i

  /// eta(i, n) = eta0 M_i^n / sqrt(nu_n)
  Eigen::MatrixXd eta(double eta0) const {
    Eigen::MatrixXd e = mode_matrix;
    for (Eigen::Index n = 0; n < freqs.size(); ++n) e.col(n) *= eta0 / std::sqrt(freqs[n]);
    return e;
  }

  ModeSet as_mode_set() const { return ModeSet{freqs, mode_matrix}; }
};

/// Dimensionless single-direction Hessian with nominal (misadjustment-free) tweezers.
inline Eigen::MatrixXd hessian(const IonChain& chain, const TweezerArray& tw, Direction dir) {
  const int n = chain.size();
  tw.validate(n);
  const double s = coulomb_sign(dir);
  double trap2 = 1.0;
  if (dir == Direction::y) trap2 = chain.config.gamma_y * chain.config.gamma_y;
  if (dir == Direction::z) trap2 = chain.config.gamma_z * chain.config.gamma_z;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    h(i, i) = trap2 + (dir == Direction::y ? 0.0 : tw.nu0[i] * tw.nu0[i]);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = 1.0 / std::pow(std::abs(chain.positions[i] - chain.positions[j]), 3);
      h(i, i) -= s * c;
      h(i, j) = s * c;
    }
  }
  return h;
}

namespace detail {

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0) v = -v;
}

}  // namespace detail

/// Diagonalizes a symmetric Hessian. Frequencies are sorted descending, or
/// ascending when `ascending` is set.
inline PhononModes modes_from_hessian(const Eigen::MatrixXd& h, Direction dir, bool ascending) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericError("Hessian diagonalization failed");
  const Eigen::Index n = h.rows();
  const double tol = 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (es.eigenvalues()[k] <= tol) {
      std::ostringstream os;
      os << "unstable " << to_string(dir) << " mode: Hessian eigenvalue " << es.eigenvalues()[k]
         << " (zigzag onset or anti-pinning)";
      throw NumericError(os.str());
    }
  }
  PhononModes m;
  m.direction = dir;
  m.freqs.resize(n);
  m.mode_matrix.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = ascending ? k : n - 1 - k;
    m.freqs[k] = std::sqrt(es.eigenvalues()[src]);
    m.mode_matrix.col(k) = es.eigenvectors().col(src);
    detail::fix_sign(m.mode_matrix.col(k));
  }
  return m;
}

/// Normal modes along one direction. x and y are sorted by descending
/// frequency, z ascending.
inline PhononModes normal_modes(const IonChain& chain, const TweezerArray& tw, Direction dir) {
  return modes_from_hessian(hessian(chain, tw, dir), dir, dir == Direction::z);
}

struct LocalizedPair {
  int com = -1;
  int stretch = -1;
  double com_overlap = 0.0;
  double stretch_overlap = 0.0;
};

/// Indices of the modes with maximal overlap with (e_i +- e_j)/sqrt(2).
/// Throws NumericError when either overlap is below `min_overlap`.
inline LocalizedPair find_localized_pair_modes(const PhononModes& modes, int i, int j,
                                               double min_overlap = 0.9) {
  const Eigen::Index n = modes.mode_matrix.rows();
  detail::require(i >= 0 && j >= 0 && i < n && j < n && i != j, "pair indices out of range");
  LocalizedPair r;
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index k = 0; k < modes.mode_matrix.cols(); ++k) {
    const double a = modes.mode_matrix(i, k), b = modes.mode_matrix(j, k);
    const double oc = std::abs(s * (a + b)), os = std::abs(s * (a - b));
    if (oc > r.com_overlap) { r.com_overlap = oc; r.com = static_cast<int>(k); }
    if (os > r.stretch_overlap) { r.stretch_overlap = os; r.stretch = static_cast<int>(k); }
  }
  if (r.com_overlap < min_overlap || r.stretch_overlap < min_overlap || r.com == r.stretch) {
    std::ostringstream os;
    os << "pair (" << i << ", " << j << ") not localized: overlaps " << r.com_overlap << ", "
       << r.stretch_overlap;
    throw NumericError(os.str());
  }
  return r;
}

struct PairFrequencies {
  double com = 0.0;
  double stretch = 0.0;
};

/// Local COM and stretch frequencies of a pair as Rayleigh quotients
/// sqrt(v^T H v) with v = (e_i +- e_j)/sqrt(2). Unlike single eigenmodes they
/// stay well defined when nearly degenerate pair modes of different cells
/// hybridize.
inline PairFrequencies local_pair_frequencies(const PhononModes& modes, int i, int j) {
  const Eigen::Index n = modes.mode_matrix.rows();
  detail::require(i >= 0 && j >= 0 && i < n && j < n && i != j, "pair indices out of range");
  double c = 0.0, s = 0.0;
  for (Eigen::Index k = 0; k < modes.mode_matrix.cols(); ++k) {
    const double a = modes.mode_matrix(i, k), b = modes.mode_matrix(j, k);
    const double f2 = modes.freqs[k] * modes.freqs[k];
    c += 0.5 * (a + b) * (a + b) * f2;
    s += 0.5 * (a - b) * (a - b) * f2;
  }
  return {std::sqrt(c), std::sqrt(s)};
}

/// nu0 pattern with pinned pairs at slots {first, first+1} of every cell of
/// size p, counted from ion `offset`. Pinning strength alternates between
/// `nu0_a` and `nu0_b` from one pair to the next.
inline std::vector<double> periodic_pinning(int n_ions, int p, int offset, int n_pairs, double nu0_a,
                                            double nu0_b) {
  std::vector<double> nu(n_ions, 0.0);
  for (int g = 0; g < n_pairs; ++g) {
    const int i = offset + g * p;
    detail::require(i + 1 < n_ions, "pinning pattern runs past the chain end");
    const double v = (g % 2 == 0) ? nu0_a : nu0_b;
    nu[i] = v;
    nu[i + 1] = v;
  }
  return nu;
}

}  // namespace tweezer
