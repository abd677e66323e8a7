#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "rfo/closed_loop.hpp"
#include "rfo/numerics.hpp"
#include "rfo/plant.hpp"
#include "rfo/random.hpp"

namespace rfo {

// ============================================================================
// Radial distribution feeder with photovoltaic inverters
// ============================================================================

// Voltage limits used by violation counters, in per-unit.
inline constexpr double kVoltageUpperLimit = 1.1;
inline constexpr double kVoltageLowerLimit = 0.9;

// Full-scale reference case (56-bus network with 25 inverters); the default
// desk-scale case below keeps the same structure at 12 buses / 5 inverters.
inline constexpr long kReferenceCaseBuses = 56;
inline constexpr long kReferenceCaseInverters = 25;

struct Line {
  long from = 0;
  long to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
};

// Everything a feeder is built from. Loads are indexed by bus; the entry at
// the slack bus is carried but never enters the voltage map (the upstream grid
// absorbs it), which keeps schedules valid across re-rooting.
struct FeederSpec {
  long n_b = 0;
  std::vector<Line> lines;
  long pcc = 0;
  double v0 = 1.0;
  std::vector<long> pv_buses;
  std::vector<Vector> mpp;     // horizon x n_pv, >= 0
  std::vector<Vector> p_load;  // horizon x n_b
  std::vector<Vector> q_load;  // horizon x n_b
  double q_min = 0.0;
  double q_max = 0.0;
};

// Step-indexed loads for one evaluation of the voltage map.
struct LoadStep {
  Vector p;  // n_b
  Vector q;  // n_b
};

// Immutable linearized feeder. The voltage of every non-slack bus is affine in
// the injections: v = v0 1 + R (p_inj - p_load) + X (q_inj - q_load), with R, X
// the tree path-resistance/reactance matrices divided by v0. The controller
// sees only the inverter buses, through inputs u = [delta_p; q] stacked by
// block, so the sensitivity is [R_pv,pv  X_pv,pv].
class RadialFeeder {
 public:
  explicit RadialFeeder(FeederSpec spec) : spec_(std::move(spec)) {
    validate_topology();
    build_path_matrices();
    validate_schedules();
  }

  [[nodiscard]] long bus_count() const { return spec_.n_b; }
  [[nodiscard]] long pcc() const { return spec_.pcc; }
  [[nodiscard]] double v0() const { return spec_.v0; }
  [[nodiscard]] long pv_count() const { return static_cast<long>(spec_.pv_buses.size()); }
  [[nodiscard]] const std::vector<long>& pv_buses() const { return spec_.pv_buses; }
  [[nodiscard]] long horizon() const { return static_cast<long>(spec_.mpp.size()); }
  [[nodiscard]] double q_min() const { return spec_.q_min; }
  [[nodiscard]] double q_max() const { return spec_.q_max; }
  [[nodiscard]] const std::vector<Line>& lines() const { return spec_.lines; }
  [[nodiscard]] const FeederSpec& spec() const { return spec_; }

  // Path matrices over non-slack buses (ascending bus id), already / v0.
  [[nodiscard]] const Matrix& r_mat() const { return r_mat_; }
  [[nodiscard]] const Matrix& x_mat() const { return x_mat_; }

  [[nodiscard]] Vector mpp_at(long k) const { return spec_.mpp[checked_step(k)]; }
  [[nodiscard]] LoadStep load_at(long k) const {
    const auto idx = checked_step(k);
    return {spec_.p_load[idx], spec_.q_load[idx]};
  }

  // Row indices of the inverter buses within the non-slack ordering.
  [[nodiscard]] const std::vector<Eigen::Index>& pv_rows() const { return pv_rows_; }

 private:
  [[nodiscard]] std::size_t checked_step(long k) const {
    detail::require(k >= 0 && k < horizon(), "RadialFeeder: step index outside the schedule");
    return static_cast<std::size_t>(k);
  }

  void validate_topology() {
    const long n = spec_.n_b;
    detail::require(n >= 2, "RadialFeeder: need at least two buses");
    detail::require(spec_.pcc >= 0 && spec_.pcc < n, "RadialFeeder: slack bus index out of range");
    detail::require(std::isfinite(spec_.v0) && spec_.v0 > 0.0, "RadialFeeder: v0 must be > 0");
    if (static_cast<long>(spec_.lines.size()) != n - 1)
      throw InvalidTopology("RadialFeeder: a tree on n buses has exactly n - 1 lines");
    for (const Line& line : spec_.lines) {
      detail::require(line.from >= 0 && line.from < n && line.to >= 0 && line.to < n,
                      "RadialFeeder: line endpoint out of range");
      if (line.from == line.to) throw InvalidTopology("RadialFeeder: self-loop line");
      detail::require(std::isfinite(line.r) && line.r > 0.0 && std::isfinite(line.x) && line.x > 0.0,
                      "RadialFeeder: line parameters must be > 0");
    }

    detail::require(!spec_.pv_buses.empty(), "RadialFeeder: need at least one inverter bus");
    detail::require(std::is_sorted(spec_.pv_buses.begin(), spec_.pv_buses.end()),
                    "RadialFeeder: pv_buses must be sorted");
    detail::require(std::adjacent_find(spec_.pv_buses.begin(), spec_.pv_buses.end()) ==
                        spec_.pv_buses.end(),
                    "RadialFeeder: duplicate inverter bus");
    for (long b : spec_.pv_buses) {
      detail::require(b >= 0 && b < n, "RadialFeeder: inverter bus out of range");
      detail::require(b != spec_.pcc, "RadialFeeder: the slack bus cannot host an inverter");
    }

    // Rooted traversal; reaching every bus through n - 1 edges certifies a tree.
    std::vector<std::vector<std::pair<long, std::size_t>>> adjacent(static_cast<std::size_t>(n));
    for (std::size_t e = 0; e < spec_.lines.size(); ++e) {
      adjacent[static_cast<std::size_t>(spec_.lines[e].from)].emplace_back(spec_.lines[e].to, e);
      adjacent[static_cast<std::size_t>(spec_.lines[e].to)].emplace_back(spec_.lines[e].from, e);
    }
    parent_edge_.assign(static_cast<std::size_t>(n), kNoEdge);
    std::vector<long> order{spec_.pcc};
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    seen[static_cast<std::size_t>(spec_.pcc)] = true;
    for (std::size_t head = 0; head < order.size(); ++head) {
      const long bus = order[head];
      for (const auto& [next, edge] : adjacent[static_cast<std::size_t>(bus)]) {
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = true;
        parent_edge_[static_cast<std::size_t>(next)] = edge;
        order.push_back(next);
      }
    }
    if (static_cast<long>(order.size()) != n)
      throw InvalidTopology("RadialFeeder: line graph is not connected");
    bfs_order_ = std::move(order);
  }

  void build_path_matrices() {
    const long n = spec_.n_b;
    // Non-slack ordering by ascending bus id.
    ns_index_.assign(static_cast<std::size_t>(n), -1);
    Eigen::Index next = 0;
    for (long b = 0; b < n; ++b)
      if (b != spec_.pcc) ns_index_[static_cast<std::size_t>(b)] = next++;

    // A line contributes its r (x) to every pair of buses below it, so
    // R = P diag(r) P^T with P the bus-to-root path indicator: walking the
    // rooted order top-down, each bus inherits its parent's path row plus its
    // own parent line.
    const Eigen::Index ns = n - 1;
    const auto n_lines = static_cast<Eigen::Index>(spec_.lines.size());
    Matrix path = Matrix::Zero(ns, n_lines);
    Vector line_r(n_lines), line_x(n_lines);
    for (Eigen::Index e = 0; e < n_lines; ++e) {
      line_r(e) = spec_.lines[static_cast<std::size_t>(e)].r;
      line_x(e) = spec_.lines[static_cast<std::size_t>(e)].x;
    }
    for (long bus : bfs_order_) {
      if (bus == spec_.pcc) continue;
      const std::size_t edge = parent_edge_[static_cast<std::size_t>(bus)];
      const Line& line = spec_.lines[edge];
      const long parent = line.from == bus ? line.to : line.from;
      const Eigen::Index row = ns_index_[static_cast<std::size_t>(bus)];
      if (parent != spec_.pcc) path.row(row) = path.row(ns_index_[static_cast<std::size_t>(parent)]);
      path(row, static_cast<Eigen::Index>(edge)) = 1.0;
    }
    r_mat_ = path * line_r.asDiagonal() * path.transpose() / spec_.v0;
    x_mat_ = path * line_x.asDiagonal() * path.transpose() / spec_.v0;
    r_mat_ = 0.5 * (r_mat_ + r_mat_.transpose()).eval();
    x_mat_ = 0.5 * (x_mat_ + x_mat_.transpose()).eval();

    // Positive line parameters on a tree make both matrices positive definite.
    if (min_eigenvalue(r_mat_) <= 0.0 || min_eigenvalue(x_mat_) <= 0.0)
      throw InvalidTopology("RadialFeeder: path matrices are not positive definite");

    pv_rows_.clear();
    pv_rows_.reserve(spec_.pv_buses.size());
    for (long b : spec_.pv_buses) pv_rows_.push_back(ns_index_[static_cast<std::size_t>(b)]);
  }

  void validate_schedules() {
    const auto horizon = spec_.mpp.size();
    detail::require(horizon >= 1, "RadialFeeder: empty schedules");
    detail::require(spec_.p_load.size() == horizon && spec_.q_load.size() == horizon,
                    "RadialFeeder: schedule lengths differ");
    detail::require(std::isfinite(spec_.q_min) && std::isfinite(spec_.q_max) &&
                        spec_.q_min <= spec_.q_max,
                    "RadialFeeder: q_min <= q_max required");
    for (std::size_t k = 0; k < horizon; ++k) {
      detail::require(spec_.mpp[k].size() == pv_count(), "RadialFeeder: mpp dimension mismatch");
      detail::require((spec_.mpp[k].array() >= 0.0).all(), "RadialFeeder: mpp must be >= 0");
      detail::require(spec_.p_load[k].size() == spec_.n_b && spec_.q_load[k].size() == spec_.n_b,
                      "RadialFeeder: load dimension mismatch");
      detail::require_finite(spec_.p_load[k], "RadialFeeder: p_load");
      detail::require_finite(spec_.q_load[k], "RadialFeeder: q_load");
    }
  }

  static constexpr std::size_t kNoEdge = static_cast<std::size_t>(-1);

  FeederSpec spec_;
  std::vector<long> bfs_order_;
  std::vector<std::size_t> parent_edge_;
  std::vector<Eigen::Index> ns_index_;
  std::vector<Eigen::Index> pv_rows_;
  Matrix r_mat_;
  Matrix x_mat_;
};

// ============================================================================
// Voltage map, sensitivity, and per-step disturbance
// ============================================================================

namespace detail {

// Load vector restricted to the non-slack ordering.
inline Vector drop_slack(const Vector& full, long pcc) {
  Vector out(full.size() - 1);
  Eigen::Index next = 0;
  for (Eigen::Index b = 0; b < full.size(); ++b)
    if (b != pcc) out(next++) = full(b);
  return out;
}

inline Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

inline Matrix select_cols(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace detail

// Inverter-bus voltages for given inverter injections and the loads of step k.
[[nodiscard]] inline Vector lindistflow_voltages(const RadialFeeder& feeder, const Vector& p_inj,
                                                 const Vector& q_inj, long k) {
  detail::require(p_inj.size() == feeder.pv_count() && q_inj.size() == feeder.pv_count(),
                  "lindistflow_voltages: injection dimension mismatch");
  detail::require_finite(p_inj, "lindistflow_voltages: p_inj");
  detail::require_finite(q_inj, "lindistflow_voltages: q_inj");
  const LoadStep load = feeder.load_at(k);

  Vector p_net = -detail::drop_slack(load.p, feeder.pcc());
  Vector q_net = -detail::drop_slack(load.q, feeder.pcc());
  const auto& rows = feeder.pv_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p_net(rows[i]) += p_inj(static_cast<Eigen::Index>(i));
    q_net(rows[i]) += q_inj(static_cast<Eigen::Index>(i));
  }
  const Vector v_all =
      Vector::Constant(p_net.size(), feeder.v0()) + feeder.r_mat() * p_net + feeder.x_mat() * q_net;
  Vector v(feeder.pv_count());
  for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<Eigen::Index>(i)) = v_all(rows[i]);
  return v;
}

// Steady-state gain from u = [delta_p; q] to the inverter voltages.
[[nodiscard]] inline Matrix sensitivity(const RadialFeeder& feeder) {
  const Matrix r_pv = detail::select_cols(detail::select_rows(feeder.r_mat(), feeder.pv_rows()),
                                          feeder.pv_rows());
  const Matrix x_pv = detail::select_cols(detail::select_rows(feeder.x_mat(), feeder.pv_rows()),
                                          feeder.pv_rows());
  Matrix h(feeder.pv_count(), 2 * feeder.pv_count());
  h << r_pv, x_pv;
  return h;
}

// Offset of the affine voltage map at step k: the voltage at full maximum-power
// injection with zero reactive power, v = H u + disturbance(k).
[[nodiscard]] inline Vector disturbance(const RadialFeeder& feeder, long k) {
  return lindistflow_voltages(feeder, feeder.mpp_at(k), Vector::Zero(feeder.pv_count()), k);
}

// ============================================================================
// Topology switch and sensitivity fitting
// ============================================================================

// Same lines, schedules, and inverters; the slack moves to new_pcc. Previously
// fitted sensitivities are mismatched against the re-rooted feeder.
[[nodiscard]] inline RadialFeeder switch_pcc(const RadialFeeder& feeder, long new_pcc) {
  detail::require(new_pcc >= 0 && new_pcc < feeder.bus_count(),
                  "switch_pcc: bus index out of range");
  for (long b : feeder.pv_buses())
    detail::require(b != new_pcc, "switch_pcc: the slack bus cannot host an inverter");
  FeederSpec spec = feeder.spec();
  spec.pcc = new_pcc;
  return RadialFeeder(std::move(spec));
}

struct SensitivityFit {
  Matrix h_hat;     // n_pv x 2 n_pv
  Vector offset;    // n_pv
  double residual;  // Frobenius norm of the least-squares residual
};

// Least-squares affine fit v ~ H u + offset from input/voltage samples.
[[nodiscard]] inline SensitivityFit fit_sensitivity(const std::vector<Vector>& u,
                                                    const std::vector<Vector>& v) {
  detail::require(u.size() == v.size() && !u.empty(), "fit_sensitivity: sample lists must align");
  const Eigen::Index m = u.front().size();
  const Eigen::Index p = v.front().size();
  const auto t = static_cast<Eigen::Index>(u.size());
  if (t < m + 1)
    throw RankDeficient("fit_sensitivity: an affine fit needs at least input_dim + 1 samples");

  Matrix design(t, m + 1);
  Matrix targets(t, p);
  for (Eigen::Index s = 0; s < t; ++s) {
    detail::require(u[static_cast<std::size_t>(s)].size() == m &&
                        v[static_cast<std::size_t>(s)].size() == p,
                    "fit_sensitivity: inconsistent sample dimensions");
    design.row(s).head(m) = u[static_cast<std::size_t>(s)].transpose();
    design(s, m) = 1.0;
    targets.row(s) = v[static_cast<std::size_t>(s)].transpose();
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < m + 1)
    throw RankDeficient("fit_sensitivity: samples do not excite every input direction");
  const Matrix coeffs = qr.solve(targets);  // (m + 1) x p

  SensitivityFit fit;
  fit.h_hat = coeffs.topRows(m).transpose();
  fit.offset = coeffs.row(m).transpose();
  fit.residual = (design * coeffs - targets).norm();
  return fit;
}

// ============================================================================
// Case builder
// ============================================================================

// Desk-scale synthetic case. The maximum-power profile is scaled so that the
// un-curtailed midday voltage peaks at `overvoltage_target`, guaranteeing the
// uncontrolled feeder violates the upper limit and the controllers have work
// to do.
struct FeederCaseSpec {
  long buses = 12;
  long pv_count = 5;
  long horizon = 240;
  std::uint64_t seed = 1;
  double v0 = 1.0;
  double q_min = -0.3;
  double q_max = 0.3;
  double overvoltage_target = 1.15;
};

[[nodiscard]] inline RadialFeeder build_case(const FeederCaseSpec& cs) {
  detail::require(cs.buses >= 3, "build_case: need at least three buses");
  detail::require(cs.pv_count >= 1 && cs.pv_count <= cs.buses - 1,
                  "build_case: inverter count must fit the non-slack buses");
  detail::require(cs.horizon >= 8, "build_case: horizon too short for the daily shapes");
  detail::require(cs.overvoltage_target > kVoltageUpperLimit,
                  "build_case: overvoltage target must exceed the upper limit");

  FeederSpec spec;
  spec.n_b = cs.buses;
  spec.pcc = 0;
  spec.v0 = cs.v0;
  spec.q_min = cs.q_min;
  spec.q_max = cs.q_max;

  // Mostly line-shaped tree: each bus hangs off one of the three before it.
  // Segments alternate between cable-like (r-dominant) and overhead-like
  // (x-dominant) impedances, so the resistive and reactive path matrices are
  // not proportional to each other.
  Rng rng(mix_seed(cs.seed, 0xfeedu));
  std::vector<long> depth(static_cast<std::size_t>(cs.buses), 0);
  for (long b = 1; b < cs.buses; ++b) {
    const long lo = std::max<long>(0, b - 3);
    const long parent = rng.uniform_int(lo, b - 1);
    const bool cable = rng.coin();
    const double r = cable ? rng.uniform(0.03, 0.06) : rng.uniform(0.01, 0.02);
    const double x = cable ? rng.uniform(0.01, 0.02) : rng.uniform(0.03, 0.06);
    spec.lines.push_back({parent, b, r, x});
    depth[static_cast<std::size_t>(b)] = depth[static_cast<std::size_t>(parent)] + 1;
  }

  // Inverters sit at the deepest buses (strongest voltage coupling).
  std::vector<long> order(static_cast<std::size_t>(cs.buses - 1));
  for (long b = 1; b < cs.buses; ++b) order[static_cast<std::size_t>(b - 1)] = b;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (depth[static_cast<std::size_t>(a)] != depth[static_cast<std::size_t>(b)])
      return depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)];
    return a < b;
  });
  spec.pv_buses.assign(order.begin(), order.begin() + cs.pv_count);
  std::sort(spec.pv_buses.begin(), spec.pv_buses.end());

  // Daily shapes: half-sine maximum power, double-hump loads with a midday dip.
  const auto steps = static_cast<double>(cs.horizon - 1);
  const Vector mpp_amp = rng.uniform_vector(cs.pv_count, 0.8, 1.2);
  const Vector load_base = rng.uniform_vector(cs.buses, 0.03, 0.10);
  const auto bump = [&](double k, double center, double width) {
    const double z = (k - center) / width;
    return std::exp(-0.5 * z * z);
  };
  spec.mpp.reserve(static_cast<std::size_t>(cs.horizon));
  spec.p_load.reserve(static_cast<std::size_t>(cs.horizon));
  spec.q_load.reserve(static_cast<std::size_t>(cs.horizon));
  for (long k = 0; k < cs.horizon; ++k) {
    const auto kk = static_cast<double>(k);
    const double sun = std::sin(M_PI * kk / steps);
    spec.mpp.push_back(sun * mpp_amp);
    const double humps = 0.45 + 0.55 * (bump(kk, steps / 5.0, steps / 8.0) +
                                        bump(kk, 4.0 * steps / 5.0, steps / 8.0));
    spec.p_load.push_back(humps * load_base);
    spec.q_load.push_back(0.35 * humps * load_base);
  }

  // Scale the power profile so the un-curtailed midday peak voltage hits the
  // requested target exactly.
  RadialFeeder unscaled(spec);
  const long k_mid = (cs.horizon - 1) / 2;
  const Vector base_v = lindistflow_voltages(unscaled, Vector::Zero(cs.pv_count),
                                             Vector::Zero(cs.pv_count), k_mid);
  const Vector gain_v = Vector(lindistflow_voltages(unscaled, unscaled.mpp_at(k_mid),
                                                    Vector::Zero(cs.pv_count), k_mid) -
                               base_v);
  double scale = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < gain_v.size(); ++i)
    if (gain_v(i) > 0.0)
      scale = std::min(scale, (cs.overvoltage_target - base_v(i)) / gain_v(i));
  detail::require(std::isfinite(scale) && scale > 0.0,
                  "build_case: loads already push the midday voltage past the target");
  for (auto& mpp_k : spec.mpp) mpp_k *= scale;
  return RadialFeeder(std::move(spec));
}

// ============================================================================
// Closed-loop adapter
// ============================================================================

// Scenario over the feeder's horizon with per-step input boxes
// -mpp_k <= delta_p <= 0 and q_min <= q <= q_max and reference v0. With
// meter_pole = 0 the plant is the settled map y = H u + d_k; a positive pole
// models telemetry smoothing, x+ = a x + (1-a)(H u + d_k), y = x, which keeps
// the same steady-state sensitivity but makes the measurement trail the wires.
[[nodiscard]] inline Scenario make_feeder_scenario(const RadialFeeder& feeder,
                                                   ControllerConfig controller,
                                                   double meter_pole = 0.0) {
  detail::require(meter_pole >= 0.0 && meter_pole < 1.0,
                  "make_feeder_scenario: meter pole must lie in [0, 1)");
  const long horizon = feeder.horizon();
  const long n_pv = feeder.pv_count();
  const Matrix h = sensitivity(feeder);
  const bool lagged = meter_pole > 0.0;

  PlantModel plant = lagged
                         ? PlantModel{LtiPlant(meter_pole * Matrix::Identity(n_pv, n_pv),
                                               (1.0 - meter_pole) * h,
                                               Matrix::Identity(n_pv, n_pv))}
                         : PlantModel{StaticPlant(h)};
  Scenario sc{std::move(plant), SignalSchedule{}, std::move(controller), {}, {}};
  sc.signals.horizon = horizon;
  sc.signals.d_x.reserve(static_cast<std::size_t>(horizon));
  sc.signals.d_y.reserve(static_cast<std::size_t>(horizon));
  sc.signals.r = constant_signal(horizon, Vector::Constant(n_pv, feeder.v0()));
  std::vector<Vector> lo, hi;
  lo.reserve(static_cast<std::size_t>(horizon));
  hi.reserve(static_cast<std::size_t>(horizon));
  for (long k = 0; k < horizon; ++k) {
    const Vector d_k = disturbance(feeder, k);
    if (lagged) {
      sc.signals.d_x.push_back((1.0 - meter_pole) * d_k);
      sc.signals.d_y.push_back(Vector::Zero(n_pv));
    } else {
      sc.signals.d_x.emplace_back();
      sc.signals.d_y.push_back(d_k);
    }
    Vector lo_k(2 * n_pv), hi_k(2 * n_pv);
    lo_k.head(n_pv) = -feeder.mpp_at(k);
    lo_k.tail(n_pv).setConstant(feeder.q_min());
    hi_k.head(n_pv).setZero();
    hi_k.tail(n_pv).setConstant(feeder.q_max());
    lo.push_back(std::move(lo_k));
    hi.push_back(std::move(hi_k));
  }
  if (lagged) sc.x0 = disturbance(feeder, 0);  // meter pre-settled at dawn
  sc.signals.lo = std::move(lo);
  sc.signals.hi = std::move(hi);
  return sc;
}

}  // namespace rfo
