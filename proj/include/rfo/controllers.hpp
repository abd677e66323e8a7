#pragma once

#include <optional>
#include <utility>
#include <variant>

#include "rfo/problems.hpp"

namespace rfo {

// ============================================================================
// Feedback-optimization controllers
// ============================================================================

enum class ControllerVariant {
  standard,   // plain gradient step through the believed sensitivity
  robust_l2,  // adds the quadratic robustness weight to the gradient
  robust_l1   // proximal (soft-threshold) step with per-input weights
};

struct Box {
  Vector lo;
  Vector hi;

  Box(Vector lo_in, Vector hi_in) : lo(std::move(lo_in)), hi(std::move(hi_in)) {
    detail::require(lo.size() == hi.size(), "Box: lo and hi must have equal sizes");
    detail::require(((hi - lo).array() >= 0.0).all(), "Box: lo <= hi required");
  }
};

[[nodiscard]] inline Vector project_box(const Vector& u, const Vector& lo, const Vector& hi) {
  detail::require(u.size() == lo.size() && u.size() == hi.size(), "project_box: dimension mismatch");
  detail::require(((hi - lo).array() >= 0.0).all(), "project_box: lo <= hi required");
  return u.cwiseMax(lo).cwiseMin(hi);
}

// Gains and model the controller runs with. The regularizer slot must match
// the variant; the box (when present) clamps after the prox.
struct ControllerConfig {
  ControllerVariant variant = ControllerVariant::standard;
  double eta = 0.0;
  SymPosSemiDef r_weight;
  SymPosSemiDef q_weight;
  double lambda = 1.0;
  Matrix h_hat;
  std::optional<Regularizer> reg;
  std::optional<Box> box;

  [[nodiscard]] Eigen::Index input_dim() const { return h_hat.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return h_hat.rows(); }

  void validate() const {
    detail::require(std::isfinite(eta) && eta > 0.0, "ControllerConfig: eta must be > 0");
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "ControllerConfig: lambda must be >= 0");
    detail::require(r_weight.dim() == input_dim(), "ControllerConfig: R dimension mismatch");
    detail::require(q_weight.dim() == output_dim(), "ControllerConfig: Q dimension mismatch");
    detail::require_finite(h_hat, "ControllerConfig: H_hat");
    if (variant == ControllerVariant::robust_l2) {
      detail::require(reg.has_value() && std::holds_alternative<L2Reg>(*reg),
                      "ControllerConfig: robust_l2 requires an L2 regularizer");
      detail::require(std::get<L2Reg>(*reg).rho_gen >= 0.0, "ControllerConfig: rho_gen must be >= 0");
    }
    if (variant == ControllerVariant::robust_l1) {
      detail::require(reg.has_value() && std::holds_alternative<L1Reg>(*reg),
                      "ControllerConfig: robust_l1 requires an L1 regularizer");
      const Vector& rho = std::get<L1Reg>(*reg).rho_col;
      detail::require(rho.size() == input_dim() && (rho.array() >= 0.0).all(),
                      "ControllerConfig: rho_col must be >= 0 with one entry per input");
    }
    if (box) detail::require(box->lo.size() == input_dim(), "ControllerConfig: box dimension mismatch");
  }

  [[nodiscard]] double rho_gen() const {
    return (variant == ControllerVariant::robust_l2 && reg) ? std::get<L2Reg>(*reg).rho_gen : 0.0;
  }
  [[nodiscard]] Vector rho_col() const {
    if (variant == ControllerVariant::robust_l1 && reg) return std::get<L1Reg>(*reg).rho_col;
    return Vector::Zero(input_dim());
  }
};

struct ControllerState {
  Vector u;
  long k = 0;
};

namespace detail {

inline Vector clamp_if_boxed(Vector u, const ControllerConfig& cfg, const std::optional<Box>& step_box) {
  const Box* box = step_box ? &*step_box : (cfg.box ? &*cfg.box : nullptr);
  if (box == nullptr) return u;
  return project_box(u, box->lo, box->hi);
}

inline Vector measured_gradient(const ControllerConfig& cfg, const Vector& u, const Vector& y,
                                const Vector& r) {
  require(u.size() == cfg.input_dim(), "controller step: u dimension mismatch");
  require(y.size() == cfg.output_dim() && r.size() == cfg.output_dim(),
          "controller step: y/r dimension mismatch");
  return cfg.r_weight.matrix() * u +
         cfg.lambda * cfg.h_hat.transpose() * (cfg.q_weight.matrix() * (y - r));
}

}  // namespace detail

// u+ = u - 2 eta (R u + lambda H_hat^T Q (y - r)), clamped to the box if any.
[[nodiscard]] inline ControllerState standard_step(const ControllerState& state, const Vector& y,
                                                   const Vector& r, const ControllerConfig& cfg,
                                                   const std::optional<Box>& step_box = std::nullopt) {
  Vector u = state.u - 2.0 * cfg.eta * detail::measured_gradient(cfg, state.u, y, r);
  return {detail::clamp_if_boxed(std::move(u), cfg, step_box), state.k + 1};
}

// Quadratically regularized step: the extra rho u joins the gradient.
[[nodiscard]] inline ControllerState robust_l2_step(const ControllerState& state, const Vector& y,
                                                    const Vector& r, const ControllerConfig& cfg,
                                                    const std::optional<Box>& step_box = std::nullopt) {
  const double rho = cfg.rho_gen();
  Vector u = state.u -
             2.0 * cfg.eta * (detail::measured_gradient(cfg, state.u, y, r) + rho * state.u);
  return {detail::clamp_if_boxed(std::move(u), cfg, step_box), state.k + 1};
}

// Proximal step: gradient move, soft threshold with eta rho_col, then clamp.
[[nodiscard]] inline ControllerState robust_l1_step(const ControllerState& state, const Vector& y,
                                                    const Vector& r, const ControllerConfig& cfg,
                                                    const std::optional<Box>& step_box = std::nullopt) {
  const Vector tau = cfg.eta * cfg.rho_col();
  Vector u = soft_threshold(state.u - 2.0 * cfg.eta * detail::measured_gradient(cfg, state.u, y, r), tau);
  return {detail::clamp_if_boxed(std::move(u), cfg, step_box), state.k + 1};
}

[[nodiscard]] inline ControllerState controller_step(const ControllerState& state, const Vector& y,
                                                     const Vector& r, const ControllerConfig& cfg,
                                                     const std::optional<Box>& step_box = std::nullopt) {
  switch (cfg.variant) {
    case ControllerVariant::standard:
      return standard_step(state, y, r, cfg, step_box);
    case ControllerVariant::robust_l2:
      return robust_l2_step(state, y, r, cfg, step_box);
    case ControllerVariant::robust_l1:
      return robust_l1_step(state, y, r, cfg, step_box);
  }
  throw InvalidArgument("controller_step: unknown variant");
}

}  // namespace rfo
