#pragma once

// Test-side oracles, written independently of the library code paths they check.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

namespace eos::oracle {

// Classical fourth-order Runge-Kutta for an autonomous system.
template <std::size_t N>
std::array<double, N> rk4(const std::function<std::array<double, N>(const std::array<double, N>&)>& f,
                          std::array<double, N> y, double t_end, std::size_t steps) {
  const double h = t_end / static_cast<double>(steps);
  auto axpy = [](const std::array<double, N>& a, double s, const std::array<double, N>& b) {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] + s * b[i];
    return out;
  };
  for (std::size_t k = 0; k < steps; ++k) {
    const auto k1 = f(y);
    const auto k2 = f(axpy(y, 0.5 * h, k1));
    const auto k3 = f(axpy(y, 0.5 * h, k2));
    const auto k4 = f(axpy(y, h, k3));
    for (std::size_t i = 0; i < N; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return y;
}

// Largest eigenvalue of a symmetric matrix by power iteration on M + shift*I,
// with shift = sum of absolute entries so that the shifted matrix is positive
// definite and its dominant eigenvalue is the shifted maximum.
template <std::size_t N>
double power_iteration(const std::array<std::array<double, N>, N>& m, int iters = 2000000,
                       double tol = 1e-14) {
  double shift = 0.0;
  for (const auto& row : m)
    for (double v : row) shift += std::fabs(v);
  shift += 1.0;
  std::array<double, N> v{};
  for (std::size_t i = 0; i < N; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::array<double, N> w{};
    for (std::size_t i = 0; i < N; ++i) {
      w[i] = shift * v[i];
      for (std::size_t j = 0; j < N; ++j) w[i] += m[i][j] * v[j];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : w) x /= norm;
    // Rayleigh quotient of the unshifted matrix and its eigen-residual.
    std::array<double, N> mw{};
    lambda = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) mw[i] += m[i][j] * w[j];
      lambda += w[i] * mw[i];
    }
    double res = 0.0;
    for (std::size_t i = 0; i < N; ++i) res += (mw[i] - lambda * w[i]) * (mw[i] - lambda * w[i]);
    v = w;
    if (std::sqrt(res) <= tol * shift) break;
  }
  return lambda;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative difference with an absolute floor.
inline double rel_diff(double a, double b, double floor = 1e-12) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace eos::oracle
