#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "rfo/closed_loop.hpp"
#include "rfo/controllers.hpp"
#include "rfo/numerics.hpp"
#include "rfo/plant.hpp"

namespace rfo {

// ============================================================================
// Constants of the coupled input/state tracking contraction
// ============================================================================

// Everything the two-row error recursion needs, evaluated for one plant,
// controller configuration, state-cost weight Qbar, and step size eta.
//
//   w_{k+1} <= gain * w_k + q_k,  w_k = [ ||u_k - u_k*|| ; ||x_k - x_ss,k||_P ]
//
// with gain = [[alpha, eta L_T_y ||C|| / lambda_min(P)], [eta c2, c1]].
struct TheoremConstants {
  double eta = 0.0;
  ControllerVariant variant = ControllerVariant::standard;
  Matrix h_hat;

  SymPosDef p = SymPosDef::identity(1);
  double lambda_min_p = 1.0;
  double lambda_max_p = 1.0;
  double gamma = 0.0;  // lambda_min(Qbar) / lambda_max(P)

  double l_x_u = 0.0;          // ||(I-A)^{-1} B||
  double l_x_d = 0.0;          // ||(I-A)^{-1}||
  double l_t_y = 0.0;          // 2 lambda ||H_hat^T Q||, Lipschitz of the step in y
  double l_phi_u_prime = 0.0;  // ||2R + 2 lambda H_hat^T Q H_hat||
  double mu_phi = 0.0;
  double l_phi = 0.0;
  double alpha = 0.0;

  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
  double c_bar_1 = 0.0;  // equals l_t_y; kept under its own name for the q rows

  Eigen::Matrix2d gain = Eigen::Matrix2d::Zero();
  double c_m = 0.0;  // Perron eigenvalue of gain
  double r1 = 1.0;   // ||gain^k|| <= r1 c_m^k for all k >= 0
  double r2 = 1.0;   // printed bound uses a single r; r2 == r1

  double eta_star = 0.0;  // largest admissible step size (gain contraction)
};

namespace detail {

// eta-independent ingredients shared by compute_constants and max_step_size.
struct ConstantCore {
  double lambda_min_p, lambda_max_p, gamma;
  double l_x_u, l_x_d, l_t_y, l_phi_u_prime, mu_phi, l_phi;
  double norm_c, norm_hq;
  double c2, c4, c5;
  SymPosDef p = SymPosDef::identity(1);
};

inline ConstantCore constant_core(const LtiPlant& plant, const ControllerConfig& cfg,
                                  const SymPosDef& qbar) {
  cfg.validate();
  require(cfg.input_dim() == plant.input_dim() && cfg.output_dim() == plant.output_dim(),
          "compute_constants: controller/plant dimension mismatch");
  require(qbar.dim() == plant.state_dim(), "compute_constants: Qbar dimension mismatch");

  ConstantCore core;
  core.p = solve_discrete_lyapunov(plant.a(), qbar);
  core.lambda_min_p = min_eigenvalue(core.p.matrix());
  core.lambda_max_p = max_eigenvalue(core.p.matrix());
  core.gamma = min_eigenvalue(qbar.matrix()) / core.lambda_max_p;

  const Eigen::Index n = plant.state_dim();
  core.l_x_u = operator_norm(plant.solve_i_minus_a(plant.b()));
  core.l_x_d = operator_norm(plant.solve_i_minus_a(Matrix(Matrix::Identity(n, n))));
  core.norm_c = operator_norm(plant.c());
  core.norm_hq = operator_norm(cfg.h_hat.transpose() * cfg.q_weight.matrix());
  core.l_t_y = 2.0 * cfg.lambda * core.norm_hq;

  const Matrix curvature = cfg.r_weight.matrix() +
                           cfg.lambda * cfg.h_hat.transpose() * cfg.q_weight.matrix() * cfg.h_hat;
  core.l_phi_u_prime = 2.0 * operator_norm(curvature);
  const double rho_gen = cfg.rho_gen();
  core.mu_phi = 2.0 * (min_eigenvalue(curvature) + rho_gen);
  core.l_phi = 2.0 * (max_eigenvalue(curvature) + rho_gen);
  require(core.mu_phi > 0.0, "compute_constants: objective curvature must be positive definite");

  core.c2 = core.lambda_max_p * core.l_x_u * core.l_phi_u_prime;
  core.c4 = core.lambda_max_p * core.l_x_d;
  core.c5 = cfg.variant == ControllerVariant::robust_l1
                ? 2.0 * core.lambda_max_p * core.l_x_u * cfg.rho_col().norm()
                : 0.0;
  return core;
}

inline double alpha_of(const ConstantCore& core, double eta) {
  const double radicand = 1.0 - eta * (2.0 * core.mu_phi - eta * core.l_phi * core.l_phi);
  return std::sqrt(std::max(radicand, 0.0));
}

inline double c1_of(const ConstantCore& core, const ControllerConfig& cfg, double eta) {
  return std::sqrt(1.0 - core.gamma) + 2.0 * eta * cfg.lambda * core.l_x_u * core.norm_hq *
                                           core.norm_c * core.lambda_max_p / core.lambda_min_p;
}

// Perron-root contraction condition g(eta) < 1 for the 2x2 gain matrix.
inline double gain_condition_of(const ConstantCore& core, const ControllerConfig& cfg, double eta) {
  const double a = alpha_of(core, eta);
  const double d = c1_of(core, cfg, eta);
  const double bc = eta * eta * core.l_t_y * core.norm_c * core.c2 / core.lambda_min_p;
  return bc + a + d - a * d;
}

// Smallest r with ||M^k|| <= r c^k for a nonnegative 2x2 M, via the spectral
// projectors; eigenvalues of such M are always real.
inline std::pair<double, double> power_envelope(const Eigen::Matrix2d& m) {
  const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
  const double mid = 0.5 * (a + d);
  const double disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  const double lam1 = mid + disc;
  const double lam2 = mid - disc;
  if (lam1 <= 0.0) return {0.0, 1.0};
  if (lam1 - lam2 <= 1e-14 * lam1) {
    const Eigen::Matrix2d nil = m - lam1 * Eigen::Matrix2d::Identity();
    if (nil.cwiseAbs().maxCoeff() <= 1e-13 * lam1) return {lam1, 1.0};
    throw BoundInapplicable("power_envelope: defective gain matrix has no geometric envelope");
  }
  const Eigen::Matrix2d p1 = (m - lam2 * Eigen::Matrix2d::Identity()) / (lam1 - lam2);
  const Eigen::Matrix2d p2 = (m - lam1 * Eigen::Matrix2d::Identity()) / (lam2 - lam1);
  const double r = operator_norm(Matrix(p1)) + operator_norm(Matrix(p2));
  return {lam1, std::max(1.0, r)};
}

}  // namespace detail

// Value of the contraction condition g(eta); the bound machinery needs
// g(eta) < 1. Exposed for tests and diagnostics.
[[nodiscard]] inline double gain_condition(const LtiPlant& plant, const ControllerConfig& cfg,
                                           const SymPosDef& qbar, double eta) {
  detail::require(std::isfinite(eta) && eta > 0.0, "gain_condition: eta must be > 0");
  return detail::gain_condition_of(detail::constant_core(plant, cfg, qbar), cfg, eta);
}

// Largest step size with g(eta) < 1: g(0) = 1 with negative slope, and g
// exceeds 1 again at the curvature limit 2 mu / L^2, so the first upcrossing
// inside (0, 2 mu / L^2) is bracketed by a scan and bisected to ~1e-10.
[[nodiscard]] inline double max_step_size(const LtiPlant& plant, const ControllerConfig& cfg,
                                          const SymPosDef& qbar) {
  const detail::ConstantCore core = detail::constant_core(plant, cfg, qbar);
  const auto g = [&](double eta) { return detail::gain_condition_of(core, cfg, eta); };
  const double upper = 2.0 * core.mu_phi / (core.l_phi * core.l_phi);

  double lo = -1.0;  // largest scanned eta with g < 1
  double hi = upper;
  constexpr int kScan = 4096;
  double prev = upper * 1e-12;
  if (g(prev) < 1.0) lo = prev;
  for (int i = 1; i <= kScan; ++i) {
    const double eta = upper * std::pow(1e-12, 1.0 - static_cast<double>(i) / kScan);
    if (g(eta) < 1.0) {
      lo = eta;
    } else if (lo > 0.0) {
      hi = eta;
      break;
    }
    prev = eta;
  }
  if (lo < 0.0) {
    // The dip is narrower than the scan floor; walk down until inside it.
    double eta = upper * 1e-13;
    while (eta > 1e-300 && g(eta) >= 1.0) eta *= 0.1;
    detail::require(eta > 1e-300, "max_step_size: no admissible step size found");
    lo = eta;
    hi = upper * 1e-12;
  }

  const double tol = 1e-10 * std::max(1.0, upper);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

// Memoryless plants have no state coupling: the admissible range is the open
// interval (0, 2 mu / L^2) from the objective curvature alone; returns its
// supremum.
[[nodiscard]] inline double max_step_size(const StaticPlant& plant, const ControllerConfig& cfg) {
  cfg.validate();
  detail::require(cfg.input_dim() == plant.input_dim() && cfg.output_dim() == plant.output_dim(),
                  "max_step_size: controller/plant dimension mismatch");
  const Matrix curvature = cfg.r_weight.matrix() +
                           cfg.lambda * cfg.h_hat.transpose() * cfg.q_weight.matrix() * cfg.h_hat;
  const double rho_gen = cfg.rho_gen();
  const double mu = 2.0 * (min_eigenvalue(curvature) + rho_gen);
  const double l = 2.0 * (max_eigenvalue(curvature) + rho_gen);
  detail::require(mu > 0.0, "max_step_size: objective curvature must be positive definite");
  return 2.0 * mu / (l * l);
}

[[nodiscard]] inline TheoremConstants compute_constants(const LtiPlant& plant,
                                                        const ControllerConfig& cfg,
                                                        const SymPosDef& qbar, double eta) {
  detail::require(std::isfinite(eta) && eta > 0.0, "compute_constants: eta must be > 0");
  const detail::ConstantCore core = detail::constant_core(plant, cfg, qbar);

  TheoremConstants tc;
  tc.eta = eta;
  tc.variant = cfg.variant;
  tc.h_hat = cfg.h_hat;
  tc.p = core.p;
  tc.lambda_min_p = core.lambda_min_p;
  tc.lambda_max_p = core.lambda_max_p;
  tc.gamma = core.gamma;
  tc.l_x_u = core.l_x_u;
  tc.l_x_d = core.l_x_d;
  tc.l_t_y = core.l_t_y;
  tc.l_phi_u_prime = core.l_phi_u_prime;
  tc.mu_phi = core.mu_phi;
  tc.l_phi = core.l_phi;
  tc.alpha = detail::alpha_of(core, eta);
  tc.c1 = detail::c1_of(core, cfg, eta);
  tc.c2 = core.c2;
  tc.c3 = 2.0 * cfg.lambda * core.l_x_u * core.lambda_max_p * core.norm_hq;
  tc.c4 = core.c4;
  tc.c5 = core.c5;
  tc.c_bar_1 = core.l_t_y;

  tc.gain << tc.alpha, eta * core.l_t_y * core.norm_c / core.lambda_min_p,  //
      eta * core.c2, tc.c1;
  const auto [c_m, r] = detail::power_envelope(tc.gain);
  tc.c_m = c_m;
  tc.r1 = r;
  tc.r2 = r;
  tc.eta_star = max_step_size(plant, cfg, qbar);
  return tc;
}

// ============================================================================
// Tracking bound along a trajectory
// ============================================================================

// Right-hand side of the tracking bound at step k:
//   r1 c_m^k ||w0|| + r2 c_m / (1 - c_m) ||q_sup||.
[[nodiscard]] inline double iss_bound(const TheoremConstants& tc, const Eigen::Vector2d& w0,
                                      const Eigen::Vector2d& q_sup, long k) {
  detail::require(k >= 0, "iss_bound: k must be >= 0");
  if (!(tc.c_m < 1.0))
    throw BoundInapplicable("iss_bound: gain matrix is not a contraction (c_M >= 1)");
  const double transient = tc.r1 * std::pow(tc.c_m, static_cast<double>(k)) * w0.norm();
  const double persistent = tc.r2 * tc.c_m / (1.0 - tc.c_m) * q_sup.norm();
  return transient + persistent;
}

// Disturbance row sequence of the error recursion, measured from a finished
// log (requires metrics in regularized mode, the fixed point the recursion
// tracks). Entry k needs the optimizer point at k+1, so the sequence has
// steps - 1 entries.
[[nodiscard]] inline std::vector<Eigen::Vector2d> q_sequence(const TrajectoryLog& log,
                                                             const TheoremConstants& tc,
                                                             const Matrix& h_true) {
  detail::require(log.has_metrics && log.metrics_mode == OptimizerMode::regularized,
                  "q_sequence: log must carry regularized-mode metrics");
  detail::require(log.steps >= 2, "q_sequence: need at least two logged steps");
  detail::require(h_true.rows() == tc.h_hat.rows() && h_true.cols() == tc.h_hat.cols(),
                  "q_sequence: H dimension mismatch");
  const double mismatch = operator_norm(h_true - tc.h_hat);

  std::vector<Eigen::Vector2d> q;
  q.reserve(static_cast<std::size_t>(log.steps) - 1);
  for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(log.steps); ++k) {
    const double u_norm = log.u[k].norm();
    Eigen::Vector2d qk;
    qk(0) = tc.eta * tc.c_bar_1 * mismatch * u_norm + (log.u_star[k + 1] - log.u_star[k]).norm();
    qk(1) = tc.eta * tc.c3 * mismatch * u_norm + tc.c4 * (log.d[k + 1] - log.d[k]).norm() +
            tc.eta * tc.c5;
    q.push_back(qk);
  }
  return q;
}

struct BoundReport {
  bool holds = true;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> margin;  // rhs - lhs
  std::optional<long> first_violation;
};

// Checks the tracking bound pointwise along a logged run. The q supremum is a
// running componentwise sup; its last available entry also serves the final
// step, which only tightens the right-hand side.
[[nodiscard]] inline BoundReport verify_bound(const TrajectoryLog& log, const TheoremConstants& tc,
                                              const Matrix& h_true) {
  const std::vector<Eigen::Vector2d> q = q_sequence(log, tc, h_true);
  const Eigen::Vector2d w0(log.err_u[0], log.err_x_p[0]);

  BoundReport report;
  const auto steps = static_cast<std::size_t>(log.steps);
  report.lhs.reserve(steps);
  report.rhs.reserve(steps);
  report.margin.reserve(steps);

  Eigen::Vector2d q_sup = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < steps; ++k) {
    if (k < q.size()) q_sup = q_sup.cwiseMax(q[k]);
    const double lhs = std::hypot(log.err_u[k], log.err_x_p[k]);
    const double rhs = iss_bound(tc, w0, q_sup, static_cast<long>(k));
    report.lhs.push_back(lhs);
    report.rhs.push_back(rhs);
    report.margin.push_back(rhs - lhs);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-12 && !report.first_violation) {
      report.holds = false;
      report.first_violation = static_cast<long>(k);
    }
  }
  return report;
}

}  // namespace rfo
