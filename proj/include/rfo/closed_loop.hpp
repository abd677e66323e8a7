#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "rfo/controllers.hpp"
#include "rfo/plant.hpp"
#include "rfo/problems.hpp"

namespace rfo {

// Inputs beyond this norm count as divergence and truncate the run.
inline constexpr double kDivergenceGuard = 1e9;

using PlantModel = std::variant<LtiPlant, StaticPlant>;

[[nodiscard]] inline Eigen::Index plant_input_dim(const PlantModel& plant) {
  return std::visit([](const auto& p) { return p.input_dim(); }, plant);
}

[[nodiscard]] inline Eigen::Index plant_output_dim(const PlantModel& plant) {
  return std::visit([](const auto& p) { return p.output_dim(); }, plant);
}

[[nodiscard]] inline Eigen::Index plant_state_dim(const PlantModel& plant) {
  if (const auto* lti = std::get_if<LtiPlant>(&plant)) return lti->state_dim();
  return 0;
}

// True steady-state sensitivity of the simulated plant.
[[nodiscard]] inline Matrix true_sensitivity(const PlantModel& plant) {
  if (const auto* lti = std::get_if<LtiPlant>(&plant)) return sensitivity(*lti);
  return std::get<StaticPlant>(plant).h();
}

// ============================================================================
// Scenario and trajectory log
// ============================================================================

struct Scenario {
  PlantModel plant;
  SignalSchedule signals;
  ControllerConfig controller;
  Vector x0;  // empty means zeros
  Vector u0;  // empty means zeros

  void validate() const {
    controller.validate();
    signals.validate(plant_state_dim(plant), plant_output_dim(plant), plant_input_dim(plant));
    detail::require(controller.input_dim() == plant_input_dim(plant),
                    "Scenario: controller input dimension must match the plant");
    detail::require(controller.output_dim() == plant_output_dim(plant),
                    "Scenario: controller output dimension must match the plant");
    if (x0.size() > 0)
      detail::require(x0.size() == plant_state_dim(plant), "Scenario: x0 dimension mismatch");
    if (u0.size() > 0)
      detail::require(u0.size() == plant_input_dim(plant), "Scenario: u0 dimension mismatch");
  }
};

enum class RunStatus { completed, diverged };

enum class OptimizerMode {
  nominal,      // true-sensitivity objective, no regularizer
  regularized,  // the controller's own surrogate (its actual fixed point)
  robust        // min-max optimum via the exact fixed-point weight
};

// Raw closed-loop data plus (after tracking_metrics) per-step optimality
// information. A diverged run is truncated at the guard step, so `steps` may
// be smaller than the schedule horizon.
struct TrajectoryLog {
  RunStatus status = RunStatus::completed;
  long steps = 0;
  long horizon = 0;
  std::vector<Vector> u;
  std::vector<Vector> y;
  std::vector<Vector> x;  // empty vectors for memoryless plants
  std::vector<Vector> d;  // aggregate output disturbance
  std::vector<Vector> r;

  bool has_metrics = false;
  OptimizerMode metrics_mode = OptimizerMode::regularized;
  std::vector<Vector> u_star;
  std::vector<double> phi;
  std::vector<double> phi_star;
  std::vector<double> gap;
  std::vector<double> err_u;
  std::vector<double> err_x_p;
};

// ============================================================================
// Simulation
// ============================================================================

// Runs the loop  y_k = measure(x_k) ; u_{k+1} = ctrl(u_k, y_k, r_k) ;
// x_{k+1} = advance(x_k, u_k). Measurements use the pre-update state; the
// memoryless plant settles instantly, so there y_k uses the current input.
[[nodiscard]] inline TrajectoryLog run(const Scenario& sc) {
  sc.validate();
  const Eigen::Index n = plant_state_dim(sc.plant);
  const Eigen::Index m = plant_input_dim(sc.plant);
  const long horizon = sc.signals.horizon;

  TrajectoryLog log;
  log.horizon = horizon;
  log.u.reserve(horizon);
  log.y.reserve(horizon);
  log.x.reserve(horizon);
  log.d.reserve(horizon);
  log.r.reserve(horizon);

  Vector u = sc.u0.size() > 0 ? sc.u0 : Vector::Zero(m);
  Vector x = sc.x0.size() > 0 ? sc.x0 : Vector::Zero(n);

  for (long k = 0; k < horizon; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    Vector y, d_agg;
    if (const auto* lti = std::get_if<LtiPlant>(&sc.plant)) {
      y = lti->c() * x + sc.signals.d_y[idx];
      d_agg = aggregate_disturbance(*lti, sc.signals.d_x[idx], sc.signals.d_y[idx]);
    } else {
      y = std::get<StaticPlant>(sc.plant).h() * u + sc.signals.d_y[idx];
      d_agg = sc.signals.d_y[idx];
    }

    log.u.push_back(u);
    log.y.push_back(y);
    log.x.push_back(x);
    log.d.push_back(std::move(d_agg));
    log.r.push_back(sc.signals.r[idx]);
    log.steps = k + 1;

    std::optional<Box> step_box;
    if (sc.signals.lo) step_box.emplace((*sc.signals.lo)[idx], (*sc.signals.hi)[idx]);
    ControllerState next = controller_step({u, k}, y, sc.signals.r[idx], sc.controller, step_box);

    if (!(next.u.norm() <= kDivergenceGuard)) {  // catches NaN as well
      log.status = RunStatus::diverged;
      return log;
    }
    if (const auto* lti = std::get_if<LtiPlant>(&sc.plant))
      x = lti->a() * x + lti->b() * u + sc.signals.d_x[idx];
    u = std::move(next.u);
  }
  return log;
}

// ============================================================================
// Optimizer trajectories and tracking metrics
// ============================================================================

struct OptimalPoint {
  Vector u;
  double phi = 0.0;
};

// Per-step optimal point and value of the chosen objective along disturbance
// and reference sequences. `reg` is read in regularized mode only; robust mode
// recomputes the exact weight each step.
[[nodiscard]] inline std::vector<OptimalPoint> optimal_trajectory(const RobustProblem& prob,
                                                                  const Regularizer& reg,
                                                                  const std::vector<Vector>& d,
                                                                  const std::vector<Vector>& r,
                                                                  OptimizerMode mode) {
  detail::require(d.size() == r.size(), "optimal_trajectory: d and r lengths differ");
  std::vector<OptimalPoint> out;
  out.reserve(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    OptimalPoint pt;
    switch (mode) {
      case OptimizerMode::nominal: {
        pt.u = solve_l2(prob, d[k], r[k], 0.0);
        pt.phi = phi_l2(pt.u, prob, d[k], r[k], 0.0);
        break;
      }
      case OptimizerMode::regularized: {
        if (std::holds_alternative<L2Reg>(reg)) {
          const double rho = std::get<L2Reg>(reg).rho_gen;
          pt.u = solve_l2(prob, d[k], r[k], rho);
          pt.phi = phi_l2(pt.u, prob, d[k], r[k], rho);
        } else {
          const Vector& rho = std::get<L1Reg>(reg).rho_col;
          pt.u = solve_l1(prob, d[k], r[k], rho);
          pt.phi = phi_l1(pt.u, prob, d[k], r[k], rho);
        }
        break;
      }
      case OptimizerMode::robust: {
        const Regularizer exact = exact_regularizer(prob, d[k], r[k]);
        if (std::holds_alternative<L2Reg>(exact))
          pt.u = solve_l2(prob, d[k], r[k], std::get<L2Reg>(exact).rho_gen);
        else
          pt.u = solve_l1(prob, d[k], r[k], std::get<L1Reg>(exact).rho_col);
        pt.phi = robust_objective(pt.u, prob, d[k], r[k]);
        break;
      }
    }
    out.push_back(std::move(pt));
  }
  return out;
}

namespace detail {

inline RobustProblem metrics_problem(const Scenario& sc, OptimizerMode mode,
                                     const std::optional<UncertaintySet>& set) {
  RobustProblem prob{sc.controller.r_weight, sc.controller.q_weight, sc.controller.lambda,
                     mode == OptimizerMode::nominal ? true_sensitivity(sc.plant) : sc.controller.h_hat,
                     set ? *set : UncertaintySet(GenUncertainty{0.0}), RegMode::practical};
  prob.validate_dims();
  return prob;
}

inline Regularizer metrics_regularizer(const Scenario& sc, OptimizerMode mode) {
  if (mode == OptimizerMode::regularized && sc.controller.reg) return *sc.controller.reg;
  return L2Reg{0.0};
}

}  // namespace detail

// Fills the per-step optimality columns of a finished log. The default mode
// measures against the controller's own surrogate, whose minimizer is the
// fixed point the contraction analysis tracks. `qbar` weights the state-error
// norm (identity when omitted); robust mode needs `set`.
inline void tracking_metrics(TrajectoryLog& log, const Scenario& sc,
                             OptimizerMode mode = OptimizerMode::regularized,
                             const std::optional<SymPosDef>& qbar = std::nullopt,
                             const std::optional<UncertaintySet>& set = std::nullopt) {
  const RobustProblem prob = detail::metrics_problem(sc, mode, set);
  const Regularizer reg = detail::metrics_regularizer(sc, mode);
  const auto steps = static_cast<std::size_t>(log.steps);

  std::vector<Vector> d(log.d.begin(), log.d.begin() + steps);
  std::vector<Vector> r(log.r.begin(), log.r.begin() + steps);
  const std::vector<OptimalPoint> opt = optimal_trajectory(prob, reg, d, r, mode);

  std::optional<SymPosDef> p;
  const auto* lti = std::get_if<LtiPlant>(&sc.plant);
  if (lti != nullptr) {
    const SymPosDef& q = qbar ? *qbar : SymPosDef::identity(lti->state_dim());
    detail::require(q.dim() == lti->state_dim(), "tracking_metrics: Qbar dimension mismatch");
    p.emplace(solve_discrete_lyapunov(lti->a(), q));
  }

  log.u_star.assign(steps, Vector());
  log.phi.assign(steps, 0.0);
  log.phi_star.assign(steps, 0.0);
  log.gap.assign(steps, 0.0);
  log.err_u.assign(steps, 0.0);
  log.err_x_p.assign(steps, 0.0);

  for (std::size_t k = 0; k < steps; ++k) {
    double phi_k = 0.0;
    switch (mode) {
      case OptimizerMode::nominal:
        phi_k = phi_l2(log.u[k], prob, d[k], r[k], 0.0);
        break;
      case OptimizerMode::regularized:
        if (std::holds_alternative<L2Reg>(reg))
          phi_k = phi_l2(log.u[k], prob, d[k], r[k], std::get<L2Reg>(reg).rho_gen);
        else
          phi_k = phi_l1(log.u[k], prob, d[k], r[k], std::get<L1Reg>(reg).rho_col);
        break;
      case OptimizerMode::robust:
        phi_k = robust_objective(log.u[k], prob, d[k], r[k]);
        break;
    }
    log.u_star[k] = opt[k].u;
    log.phi[k] = phi_k;
    log.phi_star[k] = opt[k].phi;
    log.gap[k] = phi_k - opt[k].phi;
    log.err_u[k] = (log.u[k] - opt[k].u).norm();
    if (lti != nullptr) {
      const auto idx = static_cast<std::size_t>(k);
      const Vector x_ss = steady_state_x(*lti, log.u[k], sc.signals.d_x[idx]);
      log.err_x_p[k] = weighted_norm(log.x[k] - x_ss, *p);
    }
  }
  log.has_metrics = true;
  log.metrics_mode = mode;
}

// Final-step and tail-averaged optimality gaps (tail = last 10% of steps,
// at least one). Diverged runs report +inf.
struct GapSummary {
  double final_gap = 0.0;
  double tail_mean_gap = 0.0;
  bool diverged = false;
};

[[nodiscard]] inline GapSummary gap_summary(const TrajectoryLog& log) {
  detail::require(log.has_metrics, "gap_summary: call tracking_metrics first");
  GapSummary s;
  if (log.status == RunStatus::diverged || log.steps == 0) {
    s.final_gap = std::numeric_limits<double>::infinity();
    s.tail_mean_gap = s.final_gap;
    s.diverged = true;
    return s;
  }
  const auto steps = static_cast<std::size_t>(log.steps);
  s.final_gap = log.gap[steps - 1];
  const std::size_t tail = std::max<std::size_t>(1, steps / 10);
  double acc = 0.0;
  for (std::size_t k = steps - tail; k < steps; ++k) acc += log.gap[k];
  s.tail_mean_gap = acc / static_cast<double>(tail);
  return s;
}

}  // namespace rfo
