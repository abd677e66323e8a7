#include <cstdio>

#include "rfo/analysis.hpp"
#include "rfo/closed_loop.hpp"

// ============================================================================
// Three controllers, one wrong model
// ============================================================================
//
// A stable two-state plant is driven toward a reference through a believed
// steady-state map that is ~20% off. The standard gradient controller, its
// ridge-regularized variant, and its l1-regularized variant run the same
// schedule; the certified error envelope is then checked step by step along
// the regularized run.

namespace {

rfo::Scenario make_scenario(rfo::ControllerVariant variant, double eta, const rfo::Matrix& h_hat) {
  rfo::Matrix a(2, 2), b(2, 2), c(2, 2);
  a << 0.5, 0.1, 0.0, 0.4;
  b << 1.0, 0.0, 0.2, 1.0;
  c << 1.0, 0.0, 0.0, 1.0;

  rfo::Scenario sc{rfo::LtiPlant(a, b, c), {}, {}, {}, {}};
  sc.signals.horizon = 400;
  sc.signals.d_x = rfo::constant_signal(400, rfo::Vector::Zero(2));
  sc.signals.d_y = rfo::sinusoid_signal(400, (rfo::Vector(2) << 0.3, -0.2).finished(),
                                        (rfo::Vector(2) << 0.05, 0.05).finished(), 80.0);
  sc.signals.r = rfo::constant_signal(400, (rfo::Vector(2) << 1.0, -0.5).finished());

  sc.controller.variant = variant;
  sc.controller.eta = eta;
  sc.controller.r_weight = rfo::SymPosSemiDef(0.1 * rfo::Matrix::Identity(2, 2));
  sc.controller.q_weight = rfo::SymPosSemiDef(rfo::Matrix::Identity(2, 2));
  sc.controller.lambda = 1.0;
  sc.controller.h_hat = h_hat;
  if (variant == rfo::ControllerVariant::robust_l2) sc.controller.reg = rfo::L2Reg{0.15};
  if (variant == rfo::ControllerVariant::robust_l1)
    sc.controller.reg = rfo::L1Reg{rfo::Vector::Constant(2, 0.15)};
  return sc;
}

}  // namespace

int main() {
  rfo::Matrix a(2, 2), b(2, 2), c(2, 2);
  a << 0.5, 0.1, 0.0, 0.4;
  b << 1.0, 0.0, 0.2, 1.0;
  c << 1.0, 0.0, 0.0, 1.0;
  const rfo::LtiPlant plant(a, b, c);

  const rfo::Matrix h_true = rfo::sensitivity(plant);
  rfo::Matrix wobble(2, 2);
  wobble << 0.35, -0.10, 0.05, 0.30;
  const rfo::Matrix h_hat = h_true + wobble;
  std::printf("believed-map error   %.3f (relative %.1f%%)\n", rfo::operator_norm(wobble),
              100.0 * rfo::operator_norm(wobble) / rfo::operator_norm(h_true));

  // Step size: half the certified cap for the believed model.
  const rfo::SymPosDef qbar(rfo::Matrix::Identity(2, 2));
  rfo::Scenario probe = make_scenario(rfo::ControllerVariant::standard, 1.0, h_hat);
  const double eta_star = rfo::max_step_size(plant, probe.controller, qbar);
  const double eta = 0.5 * eta_star;
  std::printf("step size            %.5f (cap %.5f)\n\n", eta, eta_star);

  constexpr rfo::ControllerVariant kVariants[] = {rfo::ControllerVariant::standard,
                                                  rfo::ControllerVariant::robust_l2,
                                                  rfo::ControllerVariant::robust_l1};
  constexpr const char* kNames[] = {"standard", "robust_l2", "robust_l1"};

  for (int i = 0; i < 3; ++i) {
    const rfo::Scenario sc = make_scenario(kVariants[i], eta, h_hat);
    rfo::TrajectoryLog log = rfo::run(sc);
    rfo::tracking_metrics(log, sc);
    const rfo::GapSummary gaps = rfo::gap_summary(log);
    std::printf("%-10s final gap %.3e   tail mean %.3e   final input error %.3e%s\n", kNames[i],
                gaps.final_gap, gaps.tail_mean_gap, log.err_u[std::size_t(log.steps) - 1],
                gaps.diverged ? "   DIVERGED" : "");
  }

  // Certified envelope along the ridge-regularized run, against the true map.
  const rfo::Scenario reg_scenario = make_scenario(rfo::ControllerVariant::robust_l2, eta, h_hat);
  rfo::TrajectoryLog reg_log = rfo::run(reg_scenario);
  rfo::tracking_metrics(reg_log, reg_scenario);
  const rfo::TheoremConstants tc =
      rfo::compute_constants(plant, reg_scenario.controller, qbar, eta);
  const rfo::BoundReport report = rfo::verify_bound(reg_log, tc, h_true);
  double min_margin = report.margin[0];
  for (const double m : report.margin) min_margin = std::min(min_margin, m);
  std::printf("\nenvelope %s over %zu steps (contraction rate %.4f, min margin %.3e)\n",
              report.holds ? "holds" : "VIOLATED", report.lhs.size(), tc.c_m, min_margin);
  for (const std::size_t k : {std::size_t{0}, std::size_t{5}, std::size_t{20}, std::size_t{399}})
    std::printf("  k=%-4zu error %.4e  <=  bound %.4e\n", k, report.lhs[k], report.rhs[k]);
  return report.holds ? 0 : 1;
}
