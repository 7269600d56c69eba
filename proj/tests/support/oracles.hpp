#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace tweezer_test {

// Symmetric chains reduce to k = floor(N/2) unknowns u_1 < ... < u_k (positive
// half; the centre ion sits at 0 for odd N). Independent long-double Newton on
// that reduced force balance with a finite-difference Jacobian.
inline std::vector<long double> symmetric_oracle(int n) {
  const int k = n / 2;
  std::vector<long double> u(k);
  for (int i = 0; i < k; ++i) u[i] = 0.8L * (i + (n % 2 ? 1.0L : 0.5L));
  auto full = [&](const std::vector<long double>& h) {
    std::vector<long double> x;
    for (int i = k - 1; i >= 0; --i) x.push_back(-h[i]);
    if (n % 2) x.push_back(0.0L);
    for (int i = 0; i < k; ++i) x.push_back(h[i]);
    return x;
  };
  auto force = [&](const std::vector<long double>& h) {
    const auto x = full(h);
    std::vector<long double> f(k);
    for (int i = 0; i < k; ++i) {
      const int idx = n - k + i;
      long double v = x[idx];
      for (int j = 0; j < n; ++j) {
        if (j == idx) continue;
        const long double d = x[idx] - x[j];
        v -= (d > 0 ? 1.0L : -1.0L) / (d * d);
      }
      f[i] = v;
    }
    return f;
  };
  for (int it = 0; it < 100; ++it) {
    const auto f = force(u);
    long double norm = 0;
    for (auto v : f) norm = std::max(norm, std::fabs(v));
    if (norm < 1e-17L) break;
    // Jacobian by central differences, then Gaussian elimination.
    std::vector<std::vector<long double>> jac(k, std::vector<long double>(k + 1));
    for (int c = 0; c < k; ++c) {
      auto up = u, dn = u;
      const long double h = 1e-7L;
      up[c] += h;
      dn[c] -= h;
      const auto fu = force(up), fd = force(dn);
      for (int r = 0; r < k; ++r) jac[r][c] = (fu[r] - fd[r]) / (2 * h);
    }
    for (int r = 0; r < k; ++r) jac[r][k] = -f[r];
    for (int c = 0; c < k; ++c) {
      for (int r = c + 1; r < k; ++r) {
        const long double m = jac[r][c] / jac[c][c];
        for (int q = c; q <= k; ++q) jac[r][q] -= m * jac[c][q];
      }
    }
    std::vector<long double> dx(k);
    for (int r = k - 1; r >= 0; --r) {
      long double s = jac[r][k];
      for (int q = r + 1; q < k; ++q) s -= jac[r][q] * dx[q];
      dx[r] = s / jac[r][r];
    }
    for (int i = 0; i < k; ++i) u[i] += dx[i];
  }
  return full(u);
}

}  // namespace tweezer_test
