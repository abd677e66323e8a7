#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "rfo/numerics.hpp"

namespace rfo {

// ============================================================================
// Discrete-time LTI plant  x+ = A x + B u + d_x,  y = C x + d_y
// ============================================================================

// Construction validates dimensions and Schur stability once; (I - A) is
// factored here because every steady-state quantity needs it.
class LtiPlant {
 public:
  LtiPlant(Matrix a, Matrix b, Matrix c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    detail::require(a_.rows() == a_.cols(), "LtiPlant: A must be square");
    detail::require(a_.rows() >= 1, "LtiPlant: state dimension must be positive");
    detail::require(b_.rows() == a_.rows(), "LtiPlant: B row count must match A");
    detail::require(c_.cols() == a_.rows(), "LtiPlant: C column count must match A");
    detail::require(b_.cols() >= 1 && c_.rows() >= 1, "LtiPlant: input/output dimensions must be positive");
    detail::require_finite(a_, "LtiPlant: A");
    detail::require_finite(b_, "LtiPlant: B");
    detail::require_finite(c_, "LtiPlant: C");
    if (spectral_radius(a_) >= 1.0 - kStabilityMargin)
      throw UnstableSystem("LtiPlant: spectral radius of A must be < 1 - 1e-9");
    i_minus_a_lu_.compute(Matrix::Identity(a_.rows(), a_.rows()) - a_);
  }

  [[nodiscard]] Eigen::Index state_dim() const { return a_.rows(); }
  [[nodiscard]] Eigen::Index input_dim() const { return b_.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return c_.rows(); }

  [[nodiscard]] const Matrix& a() const { return a_; }
  [[nodiscard]] const Matrix& b() const { return b_; }
  [[nodiscard]] const Matrix& c() const { return c_; }

  // (I - A)^{-1} v, reusing the stored factorization.
  [[nodiscard]] Vector solve_i_minus_a(const Vector& v) const { return i_minus_a_lu_.solve(v); }
  [[nodiscard]] Matrix solve_i_minus_a(const Matrix& v) const { return i_minus_a_lu_.solve(v); }

 private:
  Matrix a_, b_, c_;
  Eigen::PartialPivLU<Matrix> i_minus_a_lu_;
};

struct PlantState {
  Vector x;
  long k = 0;
};

// One simulation step. The returned measurement uses the pre-update state:
// y_k = C x_k + d_{y,k}, then x_{k+1} = A x_k + B u_k + d_{x,k}.
[[nodiscard]] inline std::pair<PlantState, Vector> step(const LtiPlant& plant, const PlantState& state,
                                                        const Vector& u, const Vector& d_x,
                                                        const Vector& d_y) {
  detail::require(state.x.size() == plant.state_dim(), "step: state dimension mismatch");
  detail::require(u.size() == plant.input_dim(), "step: input dimension mismatch");
  detail::require(d_x.size() == plant.state_dim(), "step: d_x dimension mismatch");
  detail::require(d_y.size() == plant.output_dim(), "step: d_y dimension mismatch");
  Vector y = plant.c() * state.x + d_y;
  PlantState next{plant.a() * state.x + plant.b() * u + d_x, state.k + 1};
  return {std::move(next), std::move(y)};
}

// Steady-state input-to-output sensitivity H = C (I - A)^{-1} B.
[[nodiscard]] inline Matrix sensitivity(const LtiPlant& plant) {
  return plant.c() * plant.solve_i_minus_a(plant.b());
}

// Aggregate output disturbance d = C (I - A)^{-1} d_x + d_y.
[[nodiscard]] inline Vector aggregate_disturbance(const LtiPlant& plant, const Vector& d_x,
                                                  const Vector& d_y) {
  detail::require(d_x.size() == plant.state_dim(), "aggregate_disturbance: d_x dimension mismatch");
  detail::require(d_y.size() == plant.output_dim(), "aggregate_disturbance: d_y dimension mismatch");
  return plant.c() * plant.solve_i_minus_a(d_x) + d_y;
}

// Steady state x_ss = (I - A)^{-1} (B u + d_x) for a frozen input/disturbance.
[[nodiscard]] inline Vector steady_state_x(const LtiPlant& plant, const Vector& u, const Vector& d_x) {
  detail::require(u.size() == plant.input_dim(), "steady_state_x: input dimension mismatch");
  detail::require(d_x.size() == plant.state_dim(), "steady_state_x: d_x dimension mismatch");
  return plant.solve_i_minus_a(Vector(plant.b() * u + d_x));
}

// Steady-state output map y = H u + d.
[[nodiscard]] inline Vector steady_output(const Matrix& h, const Vector& d, const Vector& u) {
  detail::require(h.rows() == d.size(), "steady_output: H rows must match d");
  detail::require(h.cols() == u.size(), "steady_output: H cols must match u");
  return h * u + d;
}

// ============================================================================
// Memoryless plant  y = H u + d_y  (steady-state map abstraction, n = 0)
// ============================================================================

class StaticPlant {
 public:
  explicit StaticPlant(Matrix h) : h_(std::move(h)) {
    detail::require(h_.rows() >= 1 && h_.cols() >= 1, "StaticPlant: H must be nonempty");
    detail::require_finite(h_, "StaticPlant: H");
  }

  [[nodiscard]] Eigen::Index input_dim() const { return h_.cols(); }
  [[nodiscard]] Eigen::Index output_dim() const { return h_.rows(); }
  [[nodiscard]] const Matrix& h() const { return h_; }

 private:
  Matrix h_;
};

// ============================================================================
// Exogenous signal schedule over a finite horizon
// ============================================================================

// Per-step disturbances, references, and (optionally) input box bounds. All
// sequences have exactly `horizon` entries; d_x entries are empty vectors for
// memoryless plants.
struct SignalSchedule {
  long horizon = 0;
  std::vector<Vector> d_x;
  std::vector<Vector> d_y;
  std::vector<Vector> r;
  std::optional<std::vector<Vector>> lo;
  std::optional<std::vector<Vector>> hi;

  void validate(Eigen::Index n, Eigen::Index p, Eigen::Index m) const {
    detail::require(horizon >= 1, "SignalSchedule: horizon must be >= 1");
    const auto len = static_cast<std::size_t>(horizon);
    detail::require(d_x.size() == len, "SignalSchedule: d_x length != horizon");
    detail::require(d_y.size() == len, "SignalSchedule: d_y length != horizon");
    detail::require(r.size() == len, "SignalSchedule: r length != horizon");
    detail::require(lo.has_value() == hi.has_value(), "SignalSchedule: lo and hi must come together");
    if (lo) {
      detail::require(lo->size() == len, "SignalSchedule: lo length != horizon");
      detail::require(hi->size() == len, "SignalSchedule: hi length != horizon");
    }
    for (std::size_t k = 0; k < len; ++k) {
      detail::require(d_x[k].size() == n, "SignalSchedule: d_x entry dimension mismatch");
      detail::require(d_y[k].size() == p, "SignalSchedule: d_y entry dimension mismatch");
      detail::require(r[k].size() == p, "SignalSchedule: r entry dimension mismatch");
      if (lo) {
        detail::require((*lo)[k].size() == m && (*hi)[k].size() == m,
                        "SignalSchedule: box entry dimension mismatch");
        detail::require((((*hi)[k] - (*lo)[k]).array() >= 0.0).all(),
                        "SignalSchedule: box must satisfy lo <= hi");
      }
    }
  }
};

// Constant sequence helper.
[[nodiscard]] inline std::vector<Vector> constant_signal(long horizon, const Vector& value) {
  return std::vector<Vector>(static_cast<std::size_t>(horizon), value);
}

// offset + amplitude .* sin(2 pi k / period + phase), elementwise.
[[nodiscard]] inline std::vector<Vector> sinusoid_signal(long horizon, const Vector& offset,
                                                         const Vector& amplitude, double period,
                                                         double phase = 0.0) {
  detail::require(offset.size() == amplitude.size(), "sinusoid_signal: offset/amplitude mismatch");
  detail::require(period > 0.0, "sinusoid_signal: period must be positive");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (long k = 0; k < horizon; ++k) {
    const double s = std::sin(2.0 * M_PI * static_cast<double>(k) / period + phase);
    out.push_back(offset + s * amplitude);
  }
  return out;
}

}  // namespace rfo
