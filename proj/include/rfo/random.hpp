#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rfo/numerics.hpp"

namespace rfo {

// All randomness in the library flows through this wrapper around mt19937_64.
// The transformations from raw 64-bit draws to doubles are written out here
// instead of using std distributions, so a seed pins the exact stream and
// output files are reproducible byte for byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // U[0,1) with 53 random mantissa bits.
  [[nodiscard]] double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  [[nodiscard]] double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch only; two draws per call).
  [[nodiscard]] double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Exp(1) by inverse CDF.
  [[nodiscard]] double exponential() { return -std::log1p(-uniform()); }

  // Uniform integer in [lo, hi], both inclusive.
  [[nodiscard]] int uniform_int(int lo, int hi) {
    const double span = static_cast<double>(hi) - static_cast<double>(lo) + 1.0;
    int v = lo + static_cast<int>(uniform() * span);
    return v > hi ? hi : v;
  }

  [[nodiscard]] bool coin() { return (gen_() & 1u) != 0; }

  [[nodiscard]] Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uniform(lo, hi);
    return m;
  }

  [[nodiscard]] Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  [[nodiscard]] Vector uniform_vector(Eigen::Index n, double lo, double hi) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  [[nodiscard]] Vector gaussian_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

// Mixes an index into a base seed (splitmix64 finalizer) so per-cell streams
// of a sweep are decorrelated but still a pure function of (seed, index).
[[nodiscard]] inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ============================================================================
// Random test/experiment instances
// ============================================================================

// Random symmetric PSD matrix G^T G / n, optionally with a ridge to make it PD.
[[nodiscard]] inline SymPosSemiDef random_psd(Eigen::Index n, std::uint64_t seed, double ridge = 0.0) {
  Rng rng(seed);
  Matrix g = rng.gaussian_matrix(n, n);
  Matrix m = g.transpose() * g / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
  return SymPosSemiDef(0.5 * (m + m.transpose()));
}

// Random Schur-stable (A, B, C): Gaussian A rescaled to the requested spectral
// radius, Gaussian B and C scaled to keep entries O(1).
struct RandomPlantMatrices {
  Matrix a;
  Matrix b;
  Matrix c;
};

[[nodiscard]] inline RandomPlantMatrices random_stable_plant_matrices(Eigen::Index n, Eigen::Index m,
                                                                      Eigen::Index p, std::uint64_t seed,
                                                                      double rho_target = 0.8) {
  Rng rng(seed);
  Matrix a = rng.gaussian_matrix(n, n);
  const double rho = spectral_radius(a);
  if (rho > 0.0) a *= rho_target / rho;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix b = scale * rng.gaussian_matrix(n, m);
  Matrix c = scale * rng.gaussian_matrix(p, n);
  return {a, b, c};
}

// Random steady-state sensitivity with entries U(-1,1), scaled up if needed so
// the curvature floor lambda_min(R + lambda H^T Q H) >= min_curvature holds.
[[nodiscard]] inline Matrix random_sensitivity(Eigen::Index p, Eigen::Index m, std::uint64_t seed,
                                               const SymPosSemiDef& r_weight, const SymPosSemiDef& q_weight,
                                               double lambda, double min_curvature = 0.1) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Matrix h = rng.uniform_matrix(p, m, -1.0, 1.0);
    const Matrix curv = r_weight.matrix() + lambda * h.transpose() * q_weight.matrix() * h;
    if (min_eigenvalue(curv) >= min_curvature) return h;
    const Matrix hqh = h.transpose() * q_weight.matrix() * h;
    const double floor = min_eigenvalue(hqh);
    if (lambda > 0.0 && floor > 1e-12) {
      const double deficit = std::max(0.0, min_curvature - min_eigenvalue(r_weight.matrix()));
      const double s = std::sqrt(deficit / (lambda * floor)) * (1.0 + 1e-9);
      Matrix scaled = s * h;
      const Matrix curv2 =
          r_weight.matrix() + lambda * scaled.transpose() * q_weight.matrix() * scaled;
      if (min_eigenvalue(curv2) >= min_curvature * (1.0 - 1e-12)) return scaled;
    }
  }
  throw ConvergenceFailure("random_sensitivity: could not reach the curvature floor");
}

}  // namespace rfo
