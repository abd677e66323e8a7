#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <variant>

#include "rfo/numerics.hpp"
#include "rfo/random.hpp"

namespace rfo {

// ============================================================================
// Uncertainty sets on the weighted sensitivity error
// ============================================================================

// Both sets constrain the weighted error Delta_M = [0; sqrt(lambda) Q^{1/2} Delta_H]
// stacked under the input-cost block, i.e. the same slot the compact form uses.

// Frobenius ball of radius rho.
struct GenUncertainty {
  double rho = 0.0;
};

// Per-column Euclidean balls of radii rho(i).
struct ColUncertainty {
  Vector rho;
};

using UncertaintySet = std::variant<GenUncertainty, ColUncertainty>;

inline void validate(const UncertaintySet& set, Eigen::Index input_dim) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>) {
          detail::require(std::isfinite(s.rho) && s.rho >= 0.0, "GenUncertainty: rho must be >= 0");
        } else {
          detail::require(s.rho.size() == input_dim, "ColUncertainty: rho size must equal input dim");
          detail::require(s.rho.allFinite() && (s.rho.array() >= 0.0).all(),
                          "ColUncertainty: rho entries must be >= 0");
        }
      },
      set);
}

// Membership test for a stacked perturbation (top block rows count toward the
// norms, so pass the full (m+p) x m matrix).
[[nodiscard]] inline bool set_contains(const UncertaintySet& set, const Matrix& delta_m,
                                       double tol = 1e-12) {
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>) {
          return delta_m.norm() <= s.rho * (1.0 + tol) + tol * 1e-3;
        } else {
          for (Eigen::Index i = 0; i < delta_m.cols(); ++i)
            if (delta_m.col(i).norm() > s.rho(i) * (1.0 + tol) + tol * 1e-3) return false;
          return true;
        }
      },
      set);
}

// ============================================================================
// Compact least-squares form
// ============================================================================

// min_u || M u + eps ||^2 with M = [R^{1/2}; sqrt(lambda) Q^{1/2} H_hat] and
// eps = [0; sqrt(lambda) Q^{1/2} (d - r)], so the squared residual *is* the
// tracking objective ||u||_R^2 + lambda ||H_hat u + d - r||_Q^2 for every
// weight choice. Model error enters as M + Delta_M with Delta_M supported on
// the bottom block.
struct CompactForm {
  Matrix m;    // (input_dim + output_dim) x input_dim
  Vector eps;  // input_dim + output_dim
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
};

[[nodiscard]] inline CompactForm compact_form(const SymPosSemiDef& r_weight, const SymPosSemiDef& q_weight,
                                              double lambda, const Matrix& h_hat, const Vector& d,
                                              const Vector& r) {
  const Eigen::Index m = h_hat.cols();
  const Eigen::Index p = h_hat.rows();
  detail::require(r_weight.dim() == m, "compact_form: R dimension must equal input dim");
  detail::require(q_weight.dim() == p, "compact_form: Q dimension must equal output dim");
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "compact_form: lambda must be >= 0");
  detail::require(d.size() == p && r.size() == p, "compact_form: d and r must match output dim");
  detail::require_finite(h_hat, "compact_form: H_hat");

  CompactForm cf;
  cf.input_dim = m;
  cf.output_dim = p;
  cf.m.resize(m + p, m);
  const Matrix q_sqrt = psd_sqrt(q_weight);
  cf.m.topRows(m) = psd_sqrt(r_weight);
  cf.m.bottomRows(p) = std::sqrt(lambda) * q_sqrt * h_hat;
  cf.eps = Vector::Zero(m + p);
  cf.eps.tail(p) = std::sqrt(lambda) * q_sqrt * (d - r);
  return cf;
}

// ============================================================================
// Worst-case residual norm, closed forms
// ============================================================================

// max over the full-ball uncertainty of ||(M + Delta_M) u + eps||:
//   Gen: ||M u + eps|| + rho ||u||
//   Col: ||M u + eps|| + rho^T |u|
// Exact suprema over the unstructured perturbation ball (see the structured
// variant below for the subspace-restricted value).
[[nodiscard]] inline double worst_case_value(const CompactForm& cf, const Vector& u,
                                             const UncertaintySet& set) {
  detail::require(u.size() == cf.input_dim, "worst_case_value: u dimension mismatch");
  validate(set, cf.input_dim);
  const double base = (cf.m * u + cf.eps).norm();
  return std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>)
          return base + s.rho * u.norm();
        else
          return base + s.rho.dot(u.cwiseAbs());
      },
      set);
}

// Supremum when the perturbation is restricted to the bottom (output) block:
// sqrt(||a||^2 + (||b|| + growth)^2) with [a; b] = M u + eps split at row m.
// Strictly below the full-ball value whenever a != 0 and growth > 0.
[[nodiscard]] inline double structured_worst_case_value(const CompactForm& cf, const Vector& u,
                                                        const UncertaintySet& set) {
  detail::require(u.size() == cf.input_dim, "structured_worst_case_value: u dimension mismatch");
  validate(set, cf.input_dim);
  const Vector res = cf.m * u + cf.eps;
  const double a = res.head(cf.input_dim).norm();
  const double b = res.tail(cf.output_dim).norm();
  const double growth = std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>)
          return s.rho * u.norm();
        else
          return s.rho.dot(u.cwiseAbs());
      },
      set);
  return std::hypot(a, b + growth);
}

enum class PerturbationSpace {
  full,       // whole (m+p) x m slot; closed forms are tight here
  structured  // top m rows pinned to zero
};

// Argmax of the residual norm over the chosen perturbation space. The full
// variant attains worst_case_value to rounding; the structured variant attains
// structured_worst_case_value.
[[nodiscard]] inline Matrix worst_case_maximizer(const CompactForm& cf, const Vector& u,
                                                 const UncertaintySet& set,
                                                 PerturbationSpace space = PerturbationSpace::full) {
  detail::require(u.size() == cf.input_dim, "worst_case_maximizer: u dimension mismatch");
  validate(set, cf.input_dim);
  const Eigen::Index m = cf.input_dim;
  const Eigen::Index p = cf.output_dim;
  const Eigen::Index rows = m + p;

  // Alignment direction: the residual of the relevant block, or a fixed unit
  // vector when that residual vanishes (any direction attains the supremum).
  Vector dir;
  Eigen::Index offset = 0;  // row offset of the writable block
  Eigen::Index height = rows;
  if (space == PerturbationSpace::full) {
    dir = cf.m * u + cf.eps;
  } else {
    dir = (cf.m * u + cf.eps).tail(p);
    offset = m;
    height = p;
  }
  if (dir.norm() > 0.0)
    dir /= dir.norm();
  else {
    dir = Vector::Zero(height);
    dir(0) = 1.0;
  }

  Matrix delta = Matrix::Zero(rows, m);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>) {
          const double un = u.norm();
          if (un == 0.0)
            throw DegenerateInput("worst_case_maximizer: u = 0 leaves the Gen direction undefined");
          delta.block(offset, 0, height, m) = (s.rho / un) * dir * u.transpose();
        } else {
          for (Eigen::Index i = 0; i < m; ++i) {
            if (u(i) == 0.0) continue;  // zero column is optimal
            const double sign = u(i) > 0.0 ? 1.0 : -1.0;
            delta.block(offset, i, height, 1) = s.rho(i) * sign * dir;
          }
        }
      },
      set);
  return delta;
}

// ============================================================================
// Sampling and perturbation models
// ============================================================================

// Uniform draw from the set (or its boundary), returned in the stacked slot.
// The structured space puts all mass on the bottom block.
[[nodiscard]] inline Matrix sample_uncertainty(const UncertaintySet& set, Eigen::Index input_dim,
                                               Eigen::Index output_dim, bool boundary, std::uint64_t seed,
                                               PerturbationSpace space = PerturbationSpace::structured) {
  validate(set, input_dim);
  detail::require(input_dim >= 1 && output_dim >= 1, "sample_uncertainty: dimensions must be positive");
  Rng rng(seed);
  const Eigen::Index rows = input_dim + output_dim;
  const Eigen::Index offset = space == PerturbationSpace::full ? 0 : input_dim;
  const Eigen::Index height = space == PerturbationSpace::full ? rows : output_dim;

  Matrix delta = Matrix::Zero(rows, input_dim);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GenUncertainty>) {
          Matrix g = rng.gaussian_matrix(height, input_dim);
          double norm = g.norm();
          if (norm == 0.0) {
            g(0, 0) = 1.0;
            norm = 1.0;
          }
          const auto dof = static_cast<double>(height * input_dim);
          const double radius = boundary ? s.rho : s.rho * std::pow(rng.uniform(), 1.0 / dof);
          delta.block(offset, 0, height, input_dim) = (radius / norm) * g;
        } else {
          for (Eigen::Index i = 0; i < input_dim; ++i) {
            Vector g = rng.gaussian_vector(height);
            double norm = g.norm();
            if (norm == 0.0) {
              g(0) = 1.0;
              norm = 1.0;
            }
            const double radius =
                boundary ? s.rho(i)
                         : s.rho(i) * std::pow(rng.uniform(), 1.0 / static_cast<double>(height));
            delta.block(offset, i, height, 1) = (radius / norm) * g;
          }
        }
      },
      set);
  return delta;
}

// H + sigma * U with U entries i.i.d. uniform on [-1, 1].
[[nodiscard]] inline Matrix perturb_uniform(const Matrix& h, double sigma, std::uint64_t seed) {
  detail::require(std::isfinite(sigma) && sigma >= 0.0, "perturb_uniform: sigma must be >= 0");
  detail::require_finite(h, "perturb_uniform: H");
  if (sigma == 0.0) return h;
  Rng rng(seed);
  return h + sigma * rng.uniform_matrix(h.rows(), h.cols(), -1.0, 1.0);
}

// H + Delta with ||Delta||_F = 1: squared entries are a flat Dirichlet draw
// over all p*m cells (normalized Exp(1) variates), signs are fair coins.
[[nodiscard]] inline Matrix perturb_dirichlet(const Matrix& h, std::uint64_t seed) {
  detail::require_finite(h, "perturb_dirichlet: H");
  detail::require(h.size() >= 1, "perturb_dirichlet: H must be nonempty");
  Rng rng(seed);
  Matrix delta(h.rows(), h.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double e = rng.exponential();
      delta(i, j) = e;
      total += e;
    }
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double w = std::sqrt(delta(i, j) / total);
      delta(i, j) = rng.coin() ? w : -w;
    }
  delta /= delta.norm();  // pins the Frobenius norm to 1 against rounding
  return h + delta;
}

}  // namespace rfo
