#pragma once

#include <cmath>
#include <utility>
#include <variant>

#include "rfo/uncertainty.hpp"

namespace rfo {

// ============================================================================
// Robust problem description and regularizers
// ============================================================================

struct L2Reg {
  double rho_gen = 0.0;
};

struct L1Reg {
  Vector rho_col;
};

using Regularizer = std::variant<L2Reg, L1Reg>;

enum class RegMode {
  practical,  // caller supplies a fixed regularizer weight
  exact       // weight solves the fixed-point condition tying it to the set
};

// One decision instance: weighted input cost + weighted tracking cost through
// the believed sensitivity, with an uncertainty set around that sensitivity.
struct RobustProblem {
  SymPosSemiDef r_weight;
  SymPosSemiDef q_weight;
  double lambda = 1.0;
  Matrix h_hat;
  UncertaintySet set;
  RegMode reg_mode = RegMode::practical;

  [[nodiscard]] Eigen::Index input_dim() const { return h_hat.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return h_hat.rows(); }

  void validate_dims() const {
    detail::require(r_weight.dim() == input_dim(), "RobustProblem: R dimension mismatch");
    detail::require(q_weight.dim() == output_dim(), "RobustProblem: Q dimension mismatch");
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "RobustProblem: lambda must be >= 0");
    detail::require_finite(h_hat, "RobustProblem: H_hat");
    validate(set, input_dim());
  }

  // Curvature of the quadratic core 2 (R + lambda H^T Q H) (+ 2 rho for the
  // quadratically regularized variant).
  [[nodiscard]] Matrix quadratic_core() const {
    return r_weight.matrix() + lambda * h_hat.transpose() * q_weight.matrix() * h_hat;
  }
  [[nodiscard]] double mu_phi(double rho_gen = 0.0) const {
    return 2.0 * (min_eigenvalue(quadratic_core()) + rho_gen);
  }
  [[nodiscard]] double l_phi(double rho_gen = 0.0) const {
    return 2.0 * (max_eigenvalue(quadratic_core()) + rho_gen);
  }
};

// ============================================================================
// Objectives
// ============================================================================

// ||u||_R^2 + lambda ||H u + d - r||_Q^2.
[[nodiscard]] inline double nominal_objective(const Vector& u, const Matrix& h, const Vector& d,
                                              const Vector& r, const SymPosSemiDef& r_weight,
                                              const SymPosSemiDef& q_weight, double lambda) {
  detail::require(h.cols() == u.size() && h.rows() == d.size() && d.size() == r.size(),
                  "nominal_objective: dimension mismatch");
  const Vector e = h * u + d - r;
  return u.dot(r_weight.matrix() * u) + lambda * e.dot(q_weight.matrix() * e);
}

// Worst case of the nominal objective over the problem's uncertainty set
// (squared compact-form supremum).
[[nodiscard]] inline double robust_objective(const Vector& u, const RobustProblem& prob, const Vector& d,
                                             const Vector& r) {
  prob.validate_dims();
  const CompactForm cf = compact_form(prob.r_weight, prob.q_weight, prob.lambda, prob.h_hat, d, r);
  const double wc = worst_case_value(cf, u, prob.set);
  return wc * wc;
}

// Quadratically regularized surrogate and its gradient.
[[nodiscard]] inline double phi_l2(const Vector& u, const RobustProblem& prob, const Vector& d,
                                   const Vector& r, double rho_gen) {
  return nominal_objective(u, prob.h_hat, d, r, prob.r_weight, prob.q_weight, prob.lambda) +
         rho_gen * u.squaredNorm();
}

[[nodiscard]] inline Vector grad_phi_l2(const Vector& u, const RobustProblem& prob, const Vector& d,
                                        const Vector& r, double rho_gen) {
  const Vector e = prob.h_hat * u + d - r;
  return 2.0 * prob.r_weight.matrix() * u +
         2.0 * prob.lambda * prob.h_hat.transpose() * (prob.q_weight.matrix() * e) + 2.0 * rho_gen * u;
}

// l1-regularized surrogate (value only; the nonsmooth part is handled by prox).
[[nodiscard]] inline double phi_l1(const Vector& u, const RobustProblem& prob, const Vector& d,
                                   const Vector& r, const Vector& rho_col) {
  detail::require(rho_col.size() == u.size(), "phi_l1: rho_col dimension mismatch");
  return nominal_objective(u, prob.h_hat, d, r, prob.r_weight, prob.q_weight, prob.lambda) +
         rho_col.dot(u.cwiseAbs());
}

// Componentwise soft threshold: argmin_x 1/2 (x - v)^2 + tau |x|.
[[nodiscard]] inline Vector soft_threshold(const Vector& v, const Vector& tau) {
  detail::require(tau.size() == v.size(), "soft_threshold: tau dimension mismatch");
  detail::require((tau.array() >= 0.0).all(), "soft_threshold: tau must be >= 0");
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - tau(i);
    out(i) = mag > 0.0 ? (v(i) > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

// ============================================================================
// Solvers
// ============================================================================

// Minimizer of phi_l2: (R + lambda H^T Q H + rho I) u = -lambda H^T Q (d - r).
[[nodiscard]] inline Vector solve_l2(const RobustProblem& prob, const Vector& d, const Vector& r,
                                     double rho_gen) {
  prob.validate_dims();
  detail::require(std::isfinite(rho_gen) && rho_gen >= 0.0, "solve_l2: rho_gen must be >= 0");
  const Eigen::Index m = prob.input_dim();
  const Matrix w = prob.quadratic_core() + rho_gen * Matrix::Identity(m, m);
  if (min_eigenvalue(w) <= 1e-12) throw IllPosed("solve_l2: quadratic core is singular");
  const Vector g0 = prob.lambda * prob.h_hat.transpose() * (prob.q_weight.matrix() * (d - r));
  Eigen::LDLT<Matrix> ldlt(w);
  Vector u = ldlt.solve(-g0);
  u += ldlt.solve(-g0 - w * u);  // one refinement step
  const double grad_norm = grad_phi_l2(u, prob, d, r, rho_gen).norm();
  if (grad_norm > 1e-9 * std::max(1.0, g0.norm()))
    throw ConvergenceFailure("solve_l2: stationarity residual " + std::to_string(grad_norm));
  return u;
}

// Minimizer of phi_l1 by proximal gradient with fixed step 1/L. Stops when the
// gradient-mapping norm L ||u+ - u|| drops below tol (absolute).
[[nodiscard]] inline Vector solve_l1(const RobustProblem& prob, const Vector& d, const Vector& r,
                                     const Vector& rho_col, double tol = 1e-10,
                                     long max_iter = 2000000) {
  prob.validate_dims();
  detail::require(rho_col.size() == prob.input_dim(), "solve_l1: rho_col dimension mismatch");
  detail::require((rho_col.array() >= 0.0).all(), "solve_l1: rho_col must be >= 0");
  const double l_smooth = prob.l_phi();
  if (prob.mu_phi() <= 1e-12 || l_smooth <= 0.0)
    throw IllPosed("solve_l1: quadratic core is singular");
  const double step = 1.0 / l_smooth;
  const Vector tau = step * rho_col;
  Vector u = Vector::Zero(prob.input_dim());
  for (long it = 0; it < max_iter; ++it) {
    const Vector u_next = soft_threshold(u - step * grad_phi_l2(u, prob, d, r, 0.0), tau);
    const double move = (u_next - u).norm();
    u = u_next;
    if (l_smooth * move <= tol) return u;
  }
  throw ConvergenceFailure("solve_l1: prox-gradient did not reach tol within the iteration cap");
}

// ============================================================================
// Exact regularizer: fixed point tying the weight to the uncertainty set
// ============================================================================

// Weight that makes the regularized minimizer solve the min-max problem:
//   Gen: rho = rho_set ||M u* + eps|| / ||u*||   (rho_set / ||u*|| if the
//        residual vanishes)
//   Col: rho = 2 ||M u* + eps|| rho_set          (rho_set if it vanishes)
// with u* the regularized minimizer at that weight. Solved by the damped
// iteration rho+ = (1 - beta) rho + beta cond(u*(rho)), beta = 1/2.
[[nodiscard]] inline Regularizer exact_regularizer(const RobustProblem& prob, const Vector& d,
                                                   const Vector& r) {
  prob.validate_dims();
  const CompactForm cf = compact_form(prob.r_weight, prob.q_weight, prob.lambda, prob.h_hat, d, r);
  constexpr double kBeta = 0.5;
  constexpr int kMaxIter = 500;
  constexpr double kRelTol = 1e-8;
  const double eps_scale = std::max(1.0, cf.eps.norm());

  if (std::holds_alternative<GenUncertainty>(prob.set)) {
    const double rho_set = std::get<GenUncertainty>(prob.set).rho;
    if (rho_set == 0.0) return L2Reg{0.0};

    const auto condition = [&](double rho) {
      const Vector u = solve_l2(prob, d, r, rho);
      const double un = u.norm();
      if (un <= 1e-12 * eps_scale)
        throw DegenerateOptimum("exact_regularizer: minimizer collapsed to zero (no finite weight)");
      const double res = (cf.m * u + cf.eps).norm();
      if (res <= 1e-14 * eps_scale) return rho_set / un;
      return rho_set * res / un;
    };

    double rho = condition(0.0);
    for (int it = 0; it < kMaxIter; ++it) {
      const double target = condition(rho);
      if (std::abs(rho - target) <= kRelTol * std::max(1.0, std::abs(rho))) return L2Reg{rho};
      rho = (1.0 - kBeta) * rho + kBeta * target;
    }
    throw ConvergenceFailure("exact_regularizer: Gen fixed point did not converge in 500 iterations");
  }

  const Vector rho_set = std::get<ColUncertainty>(prob.set).rho;
  if (rho_set.maxCoeff() == 0.0) return L1Reg{Vector::Zero(prob.input_dim())};

  const auto condition = [&](const Vector& rho) {
    const Vector u = solve_l1(prob, d, r, rho, 1e-12);
    const double res = (cf.m * u + cf.eps).norm();
    if (res <= 1e-14 * eps_scale) return rho_set;
    return Vector(2.0 * res * rho_set);
  };

  Vector rho = condition(Vector::Zero(prob.input_dim()));
  for (int it = 0; it < kMaxIter; ++it) {
    const Vector target = condition(rho);
    const double gap = (rho - target).cwiseAbs().maxCoeff();
    if (gap <= kRelTol * std::max(1.0, rho.cwiseAbs().maxCoeff())) return L1Reg{rho};
    rho = (1.0 - kBeta) * rho + kBeta * target;
  }
  throw ConvergenceFailure("exact_regularizer: Col fixed point did not converge in 500 iterations");
}

// Resolves the weight a controller should use: the caller's weight in
// practical mode, the fixed-point weight in exact mode.
[[nodiscard]] inline Regularizer resolve_regularizer(const RobustProblem& prob, const Vector& d,
                                                     const Vector& r, const Regularizer& practical) {
  if (prob.reg_mode == RegMode::practical) return practical;
  return exact_regularizer(prob, d, r);
}

}  // namespace rfo
