#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "rfo/analysis.hpp"
#include "rfo/closed_loop.hpp"
#include "rfo/feeder.hpp"
#include "rfo/uncertainty.hpp"

namespace rfo {

// ============================================================================
// Scripted experiments: mismatch sweeps and the three-controller grid case
// ============================================================================

namespace detail {

// Runs body(i) for i in [0, count) on up to `jobs` threads. Each index owns
// its own output slot, so the merged result is identical for any job count.
template <typename Body>
void parallel_for(long count, int jobs, const Body& body) {
  if (jobs <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  const auto worker = [&] {
    for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
  };
  std::vector<std::thread> pool;
  const long want = std::min<long>(jobs, count);
  pool.reserve(static_cast<std::size_t>(want));
  for (long t = 0; t < want; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

[[nodiscard]] inline double median(std::vector<double> values) {
  const auto n = values.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  // +inf entries (diverged runs) sort to the top and shift the median up,
  // which is the intended penalty.
  if (n % 2 == 1) return values[n / 2];
  const double a = values[n / 2 - 1];
  const double b = values[n / 2];
  if (std::isinf(a) || std::isinf(b)) return std::max(a, b);
  return 0.5 * (a + b);
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Shared scaffolding: a first-order-lag plant realizing a random steady-state
// map y = H u + d (A = a I, B = I, C = (1-a) H, so C (I-A)^{-1} B = H for any
// pole a in [0,1)), with R = Q = I, reference r = 0, and the plain gradient
// controller that believes H_hat. Running against the lag rather than the
// settled map is what lets a step size tuned for one instance destabilize a
// larger or more perturbed one.
// ----------------------------------------------------------------------------

// Seeds 1..count, the default worker list for sweeps.
[[nodiscard]] inline std::vector<std::uint64_t> seed_range(long count) {
  detail::require(count >= 1, "seed_range: count must be >= 1");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) seeds[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i + 1);
  return seeds;
}

namespace detail {

struct SweepInstance {
  Matrix h_true;
  Vector d;
  LtiPlant plant;
  double eta_cap;  // largest certified step size for the unperturbed loop
};

[[nodiscard]] inline SweepInstance make_sweep_instance(Eigen::Index dim, double lambda, double pole,
                                                       std::uint64_t instance_seed) {
  const SymPosSemiDef eye_m{Matrix::Identity(dim, dim)};
  Matrix h_true = random_sensitivity(dim, dim, mix_seed(instance_seed, 0x5eedu), eye_m, eye_m, lambda);
  Rng rng(mix_seed(instance_seed, 0xd157u));
  Vector d = rng.uniform_vector(dim, -1.0, 1.0);
  LtiPlant plant(pole * Matrix::Identity(dim, dim), Matrix::Identity(dim, dim),
                 (1.0 - pole) * h_true);

  ControllerConfig nominal;
  nominal.variant = ControllerVariant::standard;
  nominal.r_weight = eye_m;
  nominal.q_weight = eye_m;
  nominal.lambda = lambda;
  nominal.h_hat = h_true;
  nominal.eta = 1.0;  // placeholder; the cap ignores it
  const double cap = max_step_size(plant, nominal, SymPosDef(Matrix::Identity(dim, dim)));
  return SweepInstance{std::move(h_true), std::move(d), std::move(plant), cap};
}

struct SweepRunResult {
  double final_gap = 0.0;
  double mean_gap = 0.0;
  bool diverged = false;
};

// One closed-loop run against the true plant with a (possibly wrong) believed
// sensitivity; the gap is measured against the true-H optimum (no regularizer).
[[nodiscard]] inline SweepRunResult run_sweep_cell(const SweepInstance& inst, const Matrix& h_hat,
                                                   double eta, long horizon, double lambda) {
  const auto dim = inst.h_true.rows();
  ControllerConfig cfg;
  cfg.variant = ControllerVariant::standard;
  cfg.eta = eta;
  cfg.r_weight = SymPosSemiDef(Matrix::Identity(dim, dim));
  cfg.q_weight = SymPosSemiDef(Matrix::Identity(dim, dim));
  cfg.lambda = lambda;
  cfg.h_hat = h_hat;

  Scenario sc{PlantModel{inst.plant}, SignalSchedule{}, std::move(cfg), {}, {}};
  sc.signals.horizon = horizon;
  sc.signals.d_x = constant_signal(horizon, Vector::Zero(dim));
  sc.signals.d_y = constant_signal(horizon, inst.d);
  sc.signals.r = constant_signal(horizon, Vector::Zero(dim));

  TrajectoryLog log = run(sc);
  tracking_metrics(log, sc, OptimizerMode::nominal);
  const GapSummary gaps = gap_summary(log);
  return {gaps.final_gap, gaps.tail_mean_gap, log.status == RunStatus::diverged};
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Perturbation-magnitude sweep
// ----------------------------------------------------------------------------

// One true instance per sweep; each row perturbs the believed sensitivity with
// entrywise U(-sigma, sigma) noise whose direction is fixed by the row seed,
// so growing sigma scales the same perturbation. The horizon is long enough
// for the slow exponential drift of a mismatch-destabilized loop to cross the
// divergence guard.
struct SigmaSweepSpec {
  Eigen::Index dim = 3;
  std::vector<double> sigmas{0.0, 0.15, 0.3, 0.6, 1.0, 1.5, 2.0, 2.6, 3.2};
  std::vector<std::uint64_t> seeds = seed_range(24);
  std::uint64_t instance_seed = 1;
  double lambda = 1.0;
  double pole = 0.65;         // plant lag; 0 is the settled static map
  double eta_fraction = 0.8;  // of the unperturbed nominal step-size cap
  long horizon = 1200;
  int jobs = 1;
};

struct SigmaCell {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double final_gap = 0.0;
  double mean_gap = 0.0;
  bool diverged = false;
};

[[nodiscard]] inline std::vector<SigmaCell> sweep_sigma(const SigmaSweepSpec& spec) {
  detail::require(!spec.sigmas.empty(), "sweep_sigma: sigma list must be non-empty");
  detail::require(!spec.seeds.empty(), "sweep_sigma: seed list must be non-empty");
  for (double s : spec.sigmas)
    detail::require(std::isfinite(s) && s >= 0.0, "sweep_sigma: sigma must be >= 0");
  detail::require(spec.dim >= 1, "sweep_sigma: dimension must be >= 1");
  detail::require(spec.pole >= 0.0 && spec.pole < 1.0, "sweep_sigma: pole must lie in [0, 1)");
  detail::require(spec.eta_fraction > 0.0, "sweep_sigma: eta fraction must be > 0");
  detail::require(spec.horizon >= 2, "sweep_sigma: horizon too short");

  const detail::SweepInstance inst = detail::make_sweep_instance(
      spec.dim, spec.lambda, spec.pole,
      mix_seed(spec.instance_seed, static_cast<std::uint64_t>(spec.dim)));
  const double eta = spec.eta_fraction * inst.eta_cap;

  const long n_sigma = static_cast<long>(spec.sigmas.size());
  const long n_seed = static_cast<long>(spec.seeds.size());
  std::vector<SigmaCell> table(static_cast<std::size_t>(n_sigma * n_seed));
  detail::parallel_for(n_sigma * n_seed, spec.jobs, [&](long cell) {
    const auto si = static_cast<std::size_t>(cell / n_seed);
    const auto wi = static_cast<std::size_t>(cell % n_seed);
    const double sigma = spec.sigmas[si];
    const std::uint64_t seed = spec.seeds[wi];
    const Matrix h_hat = perturb_uniform(inst.h_true, sigma, mix_seed(seed, 0xa11u));
    const detail::SweepRunResult res = detail::run_sweep_cell(inst, h_hat, eta, spec.horizon, spec.lambda);
    table[static_cast<std::size_t>(cell)] = {sigma, seed, res.final_gap, res.mean_gap, res.diverged};
  });
  return table;
}

// Median statistics per sigma, in the spec's sigma order.
struct SigmaMedian {
  double sigma = 0.0;
  double median_final_gap = 0.0;
  double median_mean_gap = 0.0;
  long diverged_count = 0;
};

[[nodiscard]] inline std::vector<SigmaMedian> sigma_medians(const SigmaSweepSpec& spec,
                                                            const std::vector<SigmaCell>& table) {
  std::vector<SigmaMedian> out;
  for (double sigma : spec.sigmas) {
    SigmaMedian row;
    row.sigma = sigma;
    std::vector<double> finals, means;
    for (const SigmaCell& cell : table) {
      if (cell.sigma != sigma) continue;
      finals.push_back(cell.final_gap);
      means.push_back(cell.mean_gap);
      row.diverged_count += cell.diverged ? 1 : 0;
    }
    row.median_final_gap = detail::median(std::move(finals));
    row.median_mean_gap = detail::median(std::move(means));
    out.push_back(row);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Dimension sweep
// ----------------------------------------------------------------------------

// Square sensitivities of growing order, each perturbed by a unit-Frobenius
// direction. One step size for every dimension, certified on the first (and
// smallest) dimension's nominal instance: holding that eta fixed while the
// loop gain grows with the order is exactly the effect the sweep measures —
// the surviving runs slow down and the largest orders destabilize.
struct DimSweepSpec {
  std::vector<Eigen::Index> dims{1, 2, 3, 4, 5, 6, 7};
  std::vector<std::uint64_t> seeds = seed_range(40);
  std::uint64_t instance_seed = 1;
  double lambda = 1.0;
  double pole = 0.65;
  double eta_fraction = 0.8;  // of the first dimension's nominal cap
  long horizon = 400;
  int jobs = 1;
};

struct DimCell {
  Eigen::Index dim = 0;
  std::uint64_t seed = 0;
  double final_gap = 0.0;
  double mean_gap = 0.0;
  bool diverged = false;
};

[[nodiscard]] inline std::vector<DimCell> sweep_dimension(const DimSweepSpec& spec) {
  detail::require(!spec.dims.empty(), "sweep_dimension: dimension list must be non-empty");
  detail::require(!spec.seeds.empty(), "sweep_dimension: seed list must be non-empty");
  for (Eigen::Index m : spec.dims)
    detail::require(m >= 1 && m <= 16, "sweep_dimension: dimensions must lie in 1..16");
  detail::require(spec.pole >= 0.0 && spec.pole < 1.0, "sweep_dimension: pole must lie in [0, 1)");
  detail::require(spec.eta_fraction > 0.0, "sweep_dimension: eta fraction must be > 0");
  detail::require(spec.horizon >= 2, "sweep_dimension: horizon too short");

  const detail::SweepInstance anchor = detail::make_sweep_instance(
      spec.dims.front(), spec.lambda, spec.pole,
      mix_seed(spec.instance_seed, static_cast<std::uint64_t>(spec.dims.front())));
  const double eta = spec.eta_fraction * anchor.eta_cap;

  const long n_dim = static_cast<long>(spec.dims.size());
  const long n_seed = static_cast<long>(spec.seeds.size());
  std::vector<DimCell> table(static_cast<std::size_t>(n_dim * n_seed));
  detail::parallel_for(n_dim * n_seed, spec.jobs, [&](long cell) {
    const auto di = static_cast<std::size_t>(cell / n_seed);
    const auto wi = static_cast<std::size_t>(cell % n_seed);
    const Eigen::Index m = spec.dims[di];
    const std::uint64_t seed = spec.seeds[wi];
    const detail::SweepInstance inst = detail::make_sweep_instance(
        m, spec.lambda, spec.pole,
        mix_seed(mix_seed(spec.instance_seed, static_cast<std::uint64_t>(m)), seed));
    const Matrix h_hat = perturb_dirichlet(inst.h_true, mix_seed(seed, 0xd1au));
    const detail::SweepRunResult res = detail::run_sweep_cell(inst, h_hat, eta, spec.horizon, spec.lambda);
    table[static_cast<std::size_t>(cell)] = {m, seed, res.final_gap, res.mean_gap, res.diverged};
  });
  return table;
}

struct DimMedian {
  Eigen::Index dim = 0;
  double median_final_gap = 0.0;
  double median_mean_gap = 0.0;
  long diverged_count = 0;
};

[[nodiscard]] inline std::vector<DimMedian> dim_medians(const DimSweepSpec& spec,
                                                        const std::vector<DimCell>& table) {
  std::vector<DimMedian> out;
  for (Eigen::Index dim : spec.dims) {
    DimMedian row;
    row.dim = dim;
    std::vector<double> finals, means;
    for (const DimCell& cell : table) {
      if (cell.dim != dim) continue;
      finals.push_back(cell.final_gap);
      means.push_back(cell.mean_gap);
      row.diverged_count += cell.diverged ? 1 : 0;
    }
    row.median_final_gap = detail::median(std::move(finals));
    row.median_mean_gap = detail::median(std::move(means));
    out.push_back(row);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Grid case: three controllers on the re-rooted feeder
// ----------------------------------------------------------------------------

// The believed sensitivity is fitted on the original topology, the slack is
// then moved, and all three controllers run the same schedules with the same
// step size and matched regularization strength rho. The step size is tuned
// aggressively on the believed closed loop (fitted map plus the known meter
// smoothing); the re-rooted feeder answers with larger gains, which is what
// separates the three controllers.
struct GridCaseSpec {
  FeederCaseSpec feeder;
  long new_pcc = -1;  // -1: pick the non-inverter bus maximizing the re-rooted gain
  std::uint64_t fit_seed = 1;
  double fit_excitation = 0.3;  // amplitude of the identification inputs
  double meter_pole = 0.8;      // telemetry smoothing in the voltage channel
  double eta_fraction = 0.92;   // of the believed closed loop's stability edge
  double lambda = 25.0;
  double r_curtail = 0.5;   // input weight on the curtailment block
  double r_reactive = 0.1;  // input weight on the reactive block
  double rho = 0.75;        // shared robustness strength for both variants
};

struct GridControllerSummary {
  std::string name;
  long violation_steps = 0;       // steps with any voltage outside the band
  double total_curtailment = 0.0;  // sum of p^MPP - p over steps and inverters
  double total_reactive = 0.0;     // sum of |q|
  long zero_q_total = 0;           // components with |q| < 1e-10 over the run
  long zero_q_final = 0;           // same, final step only
  bool diverged = false;
};

struct GridCaseResult {
  long switched_pcc = -1;
  Matrix h_pre;
  Matrix h_post;
  Matrix h_hat;  // fitted on the original topology
  double eta = 0.0;
  std::array<TrajectoryLog, 3> logs;             // standard, robust_l2, robust_l1
  std::array<GridControllerSummary, 3> summaries;
};

namespace detail {

// Violations are counted on the instantaneous wire voltages H u_k + d_k; the
// logged measurement may trail them when the meter is smoothed.
[[nodiscard]] inline GridControllerSummary summarize_grid_run(std::string name,
                                                              const TrajectoryLog& log, long n_pv,
                                                              const Matrix& h_true) {
  GridControllerSummary s;
  s.name = std::move(name);
  s.diverged = log.status == RunStatus::diverged;
  for (long k = 0; k < log.steps; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const Vector v = h_true * log.u[idx] + log.d[idx];
    if ((v.array() > kVoltageUpperLimit).any() || (v.array() < kVoltageLowerLimit).any())
      ++s.violation_steps;
    const Vector& u = log.u[idx];
    s.total_curtailment += -u.head(n_pv).sum();  // curtailment block is <= 0
    for (long i = 0; i < n_pv; ++i) {
      const double q = u(n_pv + i);
      s.total_reactive += std::abs(q);
      if (std::abs(q) < 1e-10) {
        ++s.zero_q_total;
        if (k == log.steps - 1) ++s.zero_q_final;
      }
    }
  }
  return s;
}

// Largest step size keeping the believed closed loop stable: the joint update
// matrix of the smoothed measurement state and the controller iterate is
//   [ a I          (1-a) H_hat ]
//   [ -2 eta lambda H_hat^T Q   I - 2 eta R ]
// and the edge is the first crossing of spectral radius one, found by a log
// scan plus bisection. The meter delay usually pulls the edge under the
// settled-map value 1 / max eig(K_hat), but heavy smoothing can push it past;
// the search window caps the result at twice the settled value.
[[nodiscard]] inline double grid_loop_edge(const Matrix& h_hat, const Matrix& r_weight,
                                           const Matrix& q_weight, double lambda, double pole) {
  const Eigen::Index p = h_hat.rows();
  const Eigen::Index m = h_hat.cols();
  const auto radius = [&](double eta) {
    Matrix joint = Matrix::Zero(p + m, p + m);
    joint.topLeftCorner(p, p) = pole * Matrix::Identity(p, p);
    joint.topRightCorner(p, m) = (1.0 - pole) * h_hat;
    joint.bottomLeftCorner(m, p) = -2.0 * eta * lambda * h_hat.transpose() * q_weight;
    joint.bottomRightCorner(m, m) = Matrix::Identity(m, m) - 2.0 * eta * r_weight;
    return spectral_radius(joint);
  };
  const Matrix k_hat = r_weight + lambda * h_hat.transpose() * q_weight * h_hat;
  const double settled_edge = 1.0 / k_hat.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();

  double lo = -1.0, hi = 2.0 * settled_edge;
  constexpr int kScan = 256;
  for (int i = 0; i <= kScan; ++i) {
    const double eta = 2.0 * settled_edge * std::pow(1e-6, 1.0 - static_cast<double>(i) / kScan);
    if (radius(eta) < 1.0) {
      lo = eta;
    } else if (lo > 0.0) {
      hi = eta;
      break;
    }
  }
  require(lo > 0.0, "grid_loop_edge: no stabilizing step size found");
  while (hi - lo > 1e-12 * settled_edge) {
    const double mid = 0.5 * (lo + hi);
    if (radius(mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace detail

[[nodiscard]] inline GridCaseResult grid_case(const GridCaseSpec& spec) {
  detail::require(spec.eta_fraction > 0.0, "grid_case: eta fraction must be > 0");
  detail::require(spec.meter_pole >= 0.0 && spec.meter_pole < 1.0,
                  "grid_case: meter pole must lie in [0, 1)");
  detail::require(spec.rho >= 0.0, "grid_case: rho must be >= 0");
  detail::require(spec.lambda > 0.0, "grid_case: lambda must be > 0");
  detail::require(spec.r_curtail > 0.0 && spec.r_reactive > 0.0,
                  "grid_case: input weights must be > 0");

  const RadialFeeder before = build_case(spec.feeder);
  const long n_pv = before.pv_count();
  const Matrix h_pre = sensitivity(before);

  // Identification on the original topology.
  Rng rng(mix_seed(spec.fit_seed, 0xf17u));
  const long k_fit = before.horizon() / 2;
  std::vector<Vector> u_samples, v_samples;
  for (long s = 0; s < 2 * (2 * n_pv) + 5; ++s) {
    Vector u = rng.uniform_vector(2 * n_pv, -spec.fit_excitation, spec.fit_excitation);
    v_samples.push_back(lindistflow_voltages(before, before.mpp_at(k_fit) + u.head(n_pv),
                                             u.tail(n_pv), k_fit));
    u_samples.push_back(std::move(u));
  }
  const SensitivityFit fit = fit_sensitivity(u_samples, v_samples);

  // Move the slack; by default to the non-inverter bus whose re-rooting
  // maximizes the network gain. Every path to the new root lengthens at once,
  // which is the switch that most invalidates a tuning done on the old model.
  long new_pcc = spec.new_pcc;
  if (new_pcc < 0) {
    double best = -1.0;
    for (long b = 0; b < before.bus_count(); ++b) {
      if (b == before.pcc()) continue;
      if (std::find(before.pv_buses().begin(), before.pv_buses().end(), b) !=
          before.pv_buses().end())
        continue;
      const double gain = operator_norm(sensitivity(switch_pcc(before, b)));
      if (gain > best) {
        best = gain;
        new_pcc = b;
      }
    }
  }
  const RadialFeeder after = switch_pcc(before, new_pcc);
  const Matrix h_post = sensitivity(after);

  // Shared gains; the step size comes from the believed closed loop because
  // the controllers have nothing else to anchor to.
  Matrix r_weight = Matrix::Zero(2 * n_pv, 2 * n_pv);
  r_weight.topLeftCorner(n_pv, n_pv) = spec.r_curtail * Matrix::Identity(n_pv, n_pv);
  r_weight.bottomRightCorner(n_pv, n_pv) = spec.r_reactive * Matrix::Identity(n_pv, n_pv);
  const Matrix q_weight = Matrix::Identity(n_pv, n_pv);

  ControllerConfig base;
  base.variant = ControllerVariant::standard;
  base.r_weight = SymPosSemiDef(r_weight);
  base.q_weight = SymPosSemiDef(q_weight);
  base.lambda = spec.lambda;
  base.h_hat = fit.h_hat;
  const double eta = spec.eta_fraction *
                     detail::grid_loop_edge(fit.h_hat, r_weight, q_weight, spec.lambda, spec.meter_pole);
  base.eta = eta;

  GridCaseResult result;
  result.switched_pcc = new_pcc;
  result.h_pre = h_pre;
  result.h_post = h_post;
  result.h_hat = fit.h_hat;
  result.eta = eta;

  const std::array<ControllerVariant, 3> variants{
      ControllerVariant::standard, ControllerVariant::robust_l2, ControllerVariant::robust_l1};
  const std::array<std::string, 3> names{"standard", "robust_l2", "robust_l1"};
  for (std::size_t c = 0; c < 3; ++c) {
    ControllerConfig cfg = base;
    cfg.variant = variants[c];
    if (cfg.variant == ControllerVariant::robust_l2) cfg.reg = Regularizer{L2Reg{spec.rho}};
    if (cfg.variant == ControllerVariant::robust_l1)
      cfg.reg = Regularizer{L1Reg{Vector::Constant(2 * n_pv, spec.rho)}};
    const Scenario sc = make_feeder_scenario(after, std::move(cfg), spec.meter_pole);
    result.logs[c] = run(sc);
    result.summaries[c] = detail::summarize_grid_run(names[c], result.logs[c], n_pv, h_post);
  }
  return result;
}

}  // namespace rfo
