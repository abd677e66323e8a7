#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rfo/io.hpp"

namespace rfo {

// ============================================================================
// Configuration documents: schema walking and typed extraction
// ============================================================================
//
// One JSON document describes a job. Sections (each command reads the ones it
// needs and ignores the rest):
//
//   plant        {type: "static", h}  or  {type: "dynamic", a, b, c, x0?}
//   signals      {horizon?, r?, d?, d_x?}   signals are constant or sinusoid
//   controller   {variant, eta, lambda?, h_hat, r_weight?, q_weight?, rho?,
//                 u0?, box?}
//   uncertainty  {type: "gen"|"col", rho}    robust-metrics runs only
//   experiment   per-command parameters (run metrics, sweeps, grid, analyze)
//
// Every check reports the full field path, so a bad entry reads e.g.
// "controller.h_hat[1]: expected 2 entries to match row 0".

// A node plus the dotted path that names it in diagnostics.
class ConfigView {
 public:
  ConfigView(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  [[nodiscard]] const Json& raw() const { return *j_; }
  [[nodiscard]] const std::string& path() const { return path_; }

  [[nodiscard]] std::string join(std::string_view key) const {
    if (path_.empty()) return std::string(key);
    return path_ + "." + std::string(key);
  }

  [[nodiscard]] ConfigView at(std::string_view key) const {
    require_object();
    const auto it = j_->find(std::string(key));
    if (it == j_->end()) throw ConfigError(join(key) + ": missing required field");
    return {*it, join(key)};
  }

  [[nodiscard]] std::optional<ConfigView> maybe(std::string_view key) const {
    require_object();
    const auto it = j_->find(std::string(key));
    if (it == j_->end()) return std::nullopt;
    return ConfigView{*it, join(key)};
  }

  // Rejects misspelled or stray fields instead of silently ignoring them.
  void allow_keys(std::initializer_list<std::string_view> keys) const {
    require_object();
    for (const auto& [key, value] : j_->items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError(join(key) + ": unknown field");
    }
  }

  [[nodiscard]] bool as_bool() const {
    if (!j_->is_boolean()) throw ConfigError(path_ + ": expected a boolean");
    return j_->get<bool>();
  }

  [[nodiscard]] double as_double() const {
    if (!j_->is_number()) throw ConfigError(path_ + ": expected a number");
    const double x = j_->get<double>();
    if (!std::isfinite(x)) throw ConfigError(path_ + ": must be finite");
    return x;
  }

  [[nodiscard]] long as_long() const {
    if (j_->is_number_unsigned()) {
      const std::uint64_t u = j_->get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<long>::max()))
        throw ConfigError(path_ + ": integer out of range");
      return static_cast<long>(u);
    }
    if (j_->is_number_integer()) return static_cast<long>(j_->get<std::int64_t>());
    throw ConfigError(path_ + ": expected an integer");
  }

  [[nodiscard]] std::uint64_t as_seed() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    if (j_->is_number_integer()) {
      const std::int64_t s = j_->get<std::int64_t>();
      if (s < 0) throw ConfigError(path_ + ": seed must be >= 0");
      return static_cast<std::uint64_t>(s);
    }
    throw ConfigError(path_ + ": expected an integer seed");
  }

  [[nodiscard]] std::string as_string() const {
    if (!j_->is_string()) throw ConfigError(path_ + ": expected a string");
    return j_->get<std::string>();
  }

  [[nodiscard]] Vector as_vector() const {
    if (!j_->is_array()) throw ConfigError(path_ + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j_->size()));
    Eigen::Index i = 0;
    for (const Json& item : *j_) {
      v(i) = ConfigView(item, path_ + "[" + std::to_string(i) + "]").as_double();
      ++i;
    }
    return v;
  }

  [[nodiscard]] Matrix as_matrix() const {
    if (!j_->is_array() || j_->empty())
      throw ConfigError(path_ + ": expected a non-empty array of row arrays");
    const auto rows = static_cast<Eigen::Index>(j_->size());
    Matrix m;
    Eigen::Index i = 0;
    for (const Json& row : *j_) {
      const std::string row_path = path_ + "[" + std::to_string(i) + "]";
      if (!row.is_array() || row.empty())
        throw ConfigError(row_path + ": expected a non-empty array of numbers");
      const auto cols = static_cast<Eigen::Index>(row.size());
      if (i == 0)
        m.resize(rows, cols);
      else if (cols != m.cols())
        throw ConfigError(row_path + ": expected " + std::to_string(m.cols()) +
                          " entries to match row 0");
      Eigen::Index jcol = 0;
      for (const Json& item : row) {
        m(i, jcol) = ConfigView(item, row_path + "[" + std::to_string(jcol) + "]").as_double();
        ++jcol;
      }
      ++i;
    }
    return m;
  }

  [[nodiscard]] std::vector<double> as_double_list() const {
    if (!j_->is_array() || j_->empty())
      throw ConfigError(path_ + ": expected a non-empty array of numbers");
    std::vector<double> out;
    out.reserve(j_->size());
    Eigen::Index i = 0;
    for (const Json& item : *j_) {
      out.push_back(ConfigView(item, path_ + "[" + std::to_string(i) + "]").as_double());
      ++i;
    }
    return out;
  }

  [[nodiscard]] std::vector<Eigen::Index> as_index_list() const {
    if (!j_->is_array() || j_->empty())
      throw ConfigError(path_ + ": expected a non-empty array of integers");
    std::vector<Eigen::Index> out;
    out.reserve(j_->size());
    Eigen::Index i = 0;
    for (const Json& item : *j_) {
      out.push_back(ConfigView(item, path_ + "[" + std::to_string(i) + "]").as_long());
      ++i;
    }
    return out;
  }

  // Defaulted scalar readers for optional fields.
  [[nodiscard]] double number(std::string_view key, double dflt) const {
    const auto f = maybe(key);
    return f ? f->as_double() : dflt;
  }
  [[nodiscard]] long integer(std::string_view key, long dflt) const {
    const auto f = maybe(key);
    return f ? f->as_long() : dflt;
  }
  [[nodiscard]] std::uint64_t seed(std::string_view key, std::uint64_t dflt) const {
    const auto f = maybe(key);
    return f ? f->as_seed() : dflt;
  }

 private:
  void require_object() const {
    if (!j_->is_object())
      throw ConfigError((path_.empty() ? std::string("top level") : path_) + ": expected an object");
  }

  const Json* j_;
  std::string path_;
};

namespace detail {

inline void allow_sections(const ConfigView& root) {
  root.allow_keys({"plant", "signals", "controller", "uncertainty", "experiment"});
}

// Re-anchors library validation errors (definiteness, stability, box order)
// onto the config field that supplied the offending value.
template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Parsing entry points
// ----------------------------------------------------------------------------

struct ParsedConfig {
  Json doc;
  std::string hash;  // fnv1a64 of the canonical dump; names every output file
};

// Syntax errors surface as ConfigError with the parser's line/column anchor.
[[nodiscard]] inline ParsedConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::string msg = e.what();
    if (!msg.empty() && msg.front() == '[') {
      const std::size_t close = msg.find("] ");
      if (close != std::string::npos) msg = msg.substr(close + 2);
    }
    throw ConfigError(msg);
  }
  if (!doc.is_object()) throw ConfigError("top level: expected an object");
  detail::allow_sections(ConfigView(doc, ""));
  std::string hash = json_hash(doc);
  return {std::move(doc), std::move(hash)};
}

[[nodiscard]] inline ParsedConfig parse_config_file(const std::string& path) {
  return parse_config(read_file(path));
}

// ----------------------------------------------------------------------------
// Section builders
// ----------------------------------------------------------------------------

[[nodiscard]] inline PlantModel plant_from_config(const ConfigView& root) {
  const ConfigView plant = root.at("plant");
  const std::string type = plant.at("type").as_string();
  if (type == "static") {
    plant.allow_keys({"type", "h", "x0"});  // x0 is rejected later with a clearer message
    Matrix h = plant.at("h").as_matrix();
    return detail::with_path(plant.join("h"), [&] { return PlantModel{StaticPlant(std::move(h))}; });
  }
  if (type == "dynamic") {
    plant.allow_keys({"type", "a", "b", "c", "x0"});
    Matrix a = plant.at("a").as_matrix();
    Matrix b = plant.at("b").as_matrix();
    Matrix c = plant.at("c").as_matrix();
    return detail::with_path(plant.path(), [&] {
      return PlantModel{LtiPlant(std::move(a), std::move(b), std::move(c))};
    });
  }
  throw ConfigError(plant.join("type") + ": expected \"static\" or \"dynamic\"");
}

// Initial state, dynamic plants only; empty means zeros.
[[nodiscard]] inline Vector x0_from_config(const ConfigView& root, const PlantModel& plant) {
  const ConfigView section = root.at("plant");
  const auto f = section.maybe("x0");
  if (!f) return {};
  if (std::holds_alternative<StaticPlant>(plant))
    throw ConfigError(f->path() + ": a static plant has no state");
  Vector x0 = f->as_vector();
  if (x0.size() != plant_state_dim(plant))
    throw ConfigError(f->path() + ": expected " + std::to_string(plant_state_dim(plant)) + " entries");
  return x0;
}

namespace detail {

[[nodiscard]] inline std::vector<Vector> signal_from_config(const std::optional<ConfigView>& field,
                                                            long horizon, Eigen::Index dim) {
  if (!field) return constant_signal(horizon, Vector::Zero(dim));
  const ConfigView& sig = *field;
  const std::string type = sig.at("type").as_string();
  const auto sized = [&](const ConfigView& f) {
    Vector v = f.as_vector();
    if (v.size() != dim)
      throw ConfigError(f.path() + ": expected " + std::to_string(dim) + " entries");
    return v;
  };
  if (type == "constant") {
    sig.allow_keys({"type", "value"});
    return constant_signal(horizon, sized(sig.at("value")));
  }
  if (type == "sinusoid") {
    sig.allow_keys({"type", "offset", "amplitude", "period", "phase"});
    const Vector offset = sized(sig.at("offset"));
    const Vector amplitude = sized(sig.at("amplitude"));
    const double period = sig.at("period").as_double();
    if (period <= 0.0) throw ConfigError(sig.join("period") + ": must be > 0");
    return sinusoid_signal(horizon, offset, amplitude, period, sig.number("phase", 0.0));
  }
  throw ConfigError(sig.join("type") + ": expected \"constant\" or \"sinusoid\"");
}

[[nodiscard]] inline SymPosSemiDef weight_from_config(const std::optional<ConfigView>& field,
                                                      Eigen::Index dim) {
  if (!field) return SymPosSemiDef(Matrix::Identity(dim, dim));
  if (field->raw().is_number()) {
    const double s = field->as_double();
    if (s < 0.0) throw ConfigError(field->path() + ": scalar weight must be >= 0");
    return SymPosSemiDef(s * Matrix::Identity(dim, dim));
  }
  Matrix m = field->as_matrix();
  if (m.rows() != dim || m.cols() != dim)
    throw ConfigError(field->path() + ": expected a " + std::to_string(dim) + " x " +
                      std::to_string(dim) + " matrix");
  return with_path(field->path(), [&] { return SymPosSemiDef(std::move(m)); });
}

}  // namespace detail

[[nodiscard]] inline ControllerConfig controller_from_config(const ConfigView& root) {
  const ConfigView ctrl = root.at("controller");
  ctrl.allow_keys({"variant", "eta", "lambda", "h_hat", "r_weight", "q_weight", "rho", "u0", "box"});

  ControllerConfig cfg;
  const std::string variant = ctrl.at("variant").as_string();
  if (variant == "standard")
    cfg.variant = ControllerVariant::standard;
  else if (variant == "robust_l2")
    cfg.variant = ControllerVariant::robust_l2;
  else if (variant == "robust_l1")
    cfg.variant = ControllerVariant::robust_l1;
  else
    throw ConfigError(ctrl.join("variant") +
                      ": expected \"standard\", \"robust_l2\", or \"robust_l1\"");

  cfg.eta = ctrl.at("eta").as_double();
  if (cfg.eta <= 0.0) throw ConfigError(ctrl.join("eta") + ": must be > 0");
  cfg.lambda = ctrl.number("lambda", 1.0);
  if (cfg.lambda < 0.0) throw ConfigError(ctrl.join("lambda") + ": must be >= 0");
  cfg.h_hat = ctrl.at("h_hat").as_matrix();

  const Eigen::Index m = cfg.h_hat.cols();
  cfg.r_weight = detail::weight_from_config(ctrl.maybe("r_weight"), m);
  cfg.q_weight = detail::weight_from_config(ctrl.maybe("q_weight"), cfg.h_hat.rows());

  const auto rho = ctrl.maybe("rho");
  if (cfg.variant == ControllerVariant::standard) {
    if (rho) throw ConfigError(rho->path() + ": the standard variant takes no regularizer");
  } else if (!rho) {
    throw ConfigError(ctrl.join("rho") + ": missing required field");
  } else if (cfg.variant == ControllerVariant::robust_l2) {
    const double s = rho->as_double();
    if (s < 0.0) throw ConfigError(rho->path() + ": must be >= 0");
    cfg.reg = Regularizer{L2Reg{s}};
  } else {
    Vector v;
    if (rho->raw().is_number())
      v = Vector::Constant(m, rho->as_double());
    else
      v = rho->as_vector();
    if (v.size() != m)
      throw ConfigError(rho->path() + ": expected " + std::to_string(m) + " entries");
    if ((v.array() < 0.0).any()) throw ConfigError(rho->path() + ": entries must be >= 0");
    cfg.reg = Regularizer{L1Reg{std::move(v)}};
  }

  if (const auto box = ctrl.maybe("box")) {
    box->allow_keys({"lo", "hi"});
    Vector lo = box->at("lo").as_vector();
    Vector hi = box->at("hi").as_vector();
    if (lo.size() != m || hi.size() != m)
      throw ConfigError(box->path() + ": lo and hi need " + std::to_string(m) + " entries each");
    cfg.box = detail::with_path(box->path(), [&] { return Box(std::move(lo), std::move(hi)); });
  }
  return cfg;
}

// Controller start point; empty means zeros.
[[nodiscard]] inline Vector u0_from_config(const ConfigView& root, Eigen::Index m) {
  const auto f = root.at("controller").maybe("u0");
  if (!f) return {};
  Vector u0 = f->as_vector();
  if (u0.size() != m)
    throw ConfigError(f->path() + ": expected " + std::to_string(m) + " entries");
  return u0;
}

[[nodiscard]] inline std::optional<UncertaintySet> uncertainty_from_config(const ConfigView& root,
                                                                           Eigen::Index m) {
  const auto section = root.maybe("uncertainty");
  if (!section) return std::nullopt;
  section->allow_keys({"type", "rho"});
  const std::string type = section->at("type").as_string();
  if (type == "gen") {
    const double rho = section->at("rho").as_double();
    if (rho < 0.0) throw ConfigError(section->join("rho") + ": must be >= 0");
    return UncertaintySet{GenUncertainty{rho}};
  }
  if (type == "col") {
    Vector rho = section->at("rho").as_vector();
    if (rho.size() != m)
      throw ConfigError(section->join("rho") + ": expected " + std::to_string(m) + " entries");
    if ((rho.array() < 0.0).any())
      throw ConfigError(section->join("rho") + ": entries must be >= 0");
    return UncertaintySet{ColUncertainty{std::move(rho)}};
  }
  throw ConfigError(section->join("type") + ": expected \"gen\" or \"col\"");
}

// ----------------------------------------------------------------------------
// Whole-scenario assembly (run, analyze-with-log)
// ----------------------------------------------------------------------------

inline constexpr long kDefaultHorizon = 500;

[[nodiscard]] inline Scenario scenario_from_config(const Json& doc) {
  const ConfigView root(doc, "");
  detail::allow_sections(root);

  PlantModel plant = plant_from_config(root);
  const Eigen::Index n = plant_state_dim(plant);
  const Eigen::Index m = plant_input_dim(plant);
  const Eigen::Index p = plant_output_dim(plant);

  ControllerConfig ctrl = controller_from_config(root);
  if (ctrl.h_hat.rows() != p || ctrl.h_hat.cols() != m)
    throw ConfigError("controller.h_hat: expected a " + std::to_string(p) + " x " +
                      std::to_string(m) + " matrix matching the plant");

  SignalSchedule signals;
  signals.horizon = kDefaultHorizon;
  std::optional<ConfigView> d_field, d_x_field, r_field;
  if (const auto section = root.maybe("signals")) {
    section->allow_keys({"horizon", "d", "d_x", "r"});
    signals.horizon = section->integer("horizon", signals.horizon);
    if (signals.horizon < 1) throw ConfigError(section->join("horizon") + ": must be >= 1");
    d_field = section->maybe("d");
    d_x_field = section->maybe("d_x");
    r_field = section->maybe("r");
    if (d_x_field && std::holds_alternative<StaticPlant>(plant))
      throw ConfigError(d_x_field->path() + ": a static plant takes no state disturbance");
  }
  signals.d_y = detail::signal_from_config(d_field, signals.horizon, p);
  signals.d_x = detail::signal_from_config(d_x_field, signals.horizon, n);
  signals.r = detail::signal_from_config(r_field, signals.horizon, p);

  Vector x0 = x0_from_config(root, plant);
  Vector u0 = u0_from_config(root, m);

  Scenario sc{std::move(plant), std::move(signals), std::move(ctrl), std::move(x0), std::move(u0)};
  detail::with_path("config", [&] {
    sc.validate();
    return 0;
  });
  return sc;
}

// Gap metrics for cmd_run: measured against the controller's own surrogate
// unless the experiment section asks for the nominal or robust optimum.
struct RunOptions {
  OptimizerMode metrics = OptimizerMode::regularized;
  std::optional<UncertaintySet> set;  // robust metrics only
};

[[nodiscard]] inline RunOptions run_options_from_config(const Json& doc, Eigen::Index m) {
  const ConfigView root(doc, "");
  RunOptions opts;
  if (const auto exp = root.maybe("experiment")) {
    const std::string type = exp->at("type").as_string();
    if (type != "run") throw ConfigError(exp->join("type") + ": expected \"run\" for this command");
    exp->allow_keys({"type", "metrics"});
    if (const auto metrics = exp->maybe("metrics")) {
      const std::string mode = metrics->as_string();
      if (mode == "nominal")
        opts.metrics = OptimizerMode::nominal;
      else if (mode == "regularized")
        opts.metrics = OptimizerMode::regularized;
      else if (mode == "robust")
        opts.metrics = OptimizerMode::robust;
      else
        throw ConfigError(metrics->path() +
                          ": expected \"nominal\", \"regularized\", or \"robust\"");
    }
  }
  if (opts.metrics == OptimizerMode::robust) {
    opts.set = uncertainty_from_config(root, m);
    if (!opts.set)
      throw ConfigError("uncertainty: robust metrics need an uncertainty section");
  }
  return opts;
}

// ----------------------------------------------------------------------------
// Sweep and grid specs
// ----------------------------------------------------------------------------

namespace detail {

[[nodiscard]] inline ConfigView experiment_of_kind(const ConfigView& root, std::string_view kind,
                                                   std::string_view command) {
  const ConfigView exp = root.at("experiment");
  const std::string type = exp.at("type").as_string();
  if (type != kind)
    throw ConfigError(exp.join("type") + ": expected \"" + std::string(kind) + "\" for " +
                      std::string(command));
  return exp;
}

[[nodiscard]] inline std::vector<std::uint64_t> offset_seeds(long count, std::uint64_t offset,
                                                             const std::string& path) {
  if (count < 1) throw ConfigError(path + ": must be >= 1");
  std::vector<std::uint64_t> seeds = seed_range(count);
  for (std::uint64_t& s : seeds) s += offset;
  return seeds;
}

}  // namespace detail

[[nodiscard]] inline SigmaSweepSpec sigma_spec_from_config(const Json& doc, int jobs,
                                                           std::uint64_t seed_offset) {
  const ConfigView root(doc, "");
  detail::allow_sections(root);
  const ConfigView exp = detail::experiment_of_kind(root, "sigma", "sweep-sigma");
  exp.allow_keys({"type", "dim", "sigmas", "seed_count", "instance_seed", "lambda", "pole",
                  "eta_fraction", "horizon"});

  SigmaSweepSpec spec;
  spec.dim = exp.integer("dim", spec.dim);
  if (const auto f = exp.maybe("sigmas")) spec.sigmas = f->as_double_list();
  spec.seeds = detail::offset_seeds(exp.integer("seed_count", static_cast<long>(spec.seeds.size())),
                                    seed_offset, exp.join("seed_count"));
  spec.instance_seed = exp.seed("instance_seed", spec.instance_seed);
  spec.lambda = exp.number("lambda", spec.lambda);
  spec.pole = exp.number("pole", spec.pole);
  spec.eta_fraction = exp.number("eta_fraction", spec.eta_fraction);
  spec.horizon = exp.integer("horizon", spec.horizon);
  spec.jobs = jobs;
  return spec;
}

[[nodiscard]] inline DimSweepSpec dim_spec_from_config(const Json& doc, int jobs,
                                                       std::uint64_t seed_offset) {
  const ConfigView root(doc, "");
  detail::allow_sections(root);
  const ConfigView exp = detail::experiment_of_kind(root, "dim", "sweep-dim");
  exp.allow_keys({"type", "dims", "seed_count", "instance_seed", "lambda", "pole", "eta_fraction",
                  "horizon"});

  DimSweepSpec spec;
  if (const auto f = exp.maybe("dims")) spec.dims = f->as_index_list();
  spec.seeds = detail::offset_seeds(exp.integer("seed_count", static_cast<long>(spec.seeds.size())),
                                    seed_offset, exp.join("seed_count"));
  spec.instance_seed = exp.seed("instance_seed", spec.instance_seed);
  spec.lambda = exp.number("lambda", spec.lambda);
  spec.pole = exp.number("pole", spec.pole);
  spec.eta_fraction = exp.number("eta_fraction", spec.eta_fraction);
  spec.horizon = exp.integer("horizon", spec.horizon);
  spec.jobs = jobs;
  return spec;
}

[[nodiscard]] inline GridCaseSpec grid_spec_from_config(const Json& doc) {
  const ConfigView root(doc, "");
  detail::allow_sections(root);
  const ConfigView exp = detail::experiment_of_kind(root, "grid", "grid");
  exp.allow_keys({"type", "feeder", "new_pcc", "fit_seed", "fit_excitation", "meter_pole",
                  "eta_fraction", "lambda", "r_curtail", "r_reactive", "rho"});

  GridCaseSpec spec;
  if (const auto feeder = exp.maybe("feeder")) {
    feeder->allow_keys(
        {"buses", "pv_count", "horizon", "seed", "v0", "q_min", "q_max", "overvoltage_target"});
    spec.feeder.buses = feeder->integer("buses", spec.feeder.buses);
    spec.feeder.pv_count = feeder->integer("pv_count", spec.feeder.pv_count);
    spec.feeder.horizon = feeder->integer("horizon", spec.feeder.horizon);
    spec.feeder.seed = feeder->seed("seed", spec.feeder.seed);
    spec.feeder.v0 = feeder->number("v0", spec.feeder.v0);
    spec.feeder.q_min = feeder->number("q_min", spec.feeder.q_min);
    spec.feeder.q_max = feeder->number("q_max", spec.feeder.q_max);
    spec.feeder.overvoltage_target =
        feeder->number("overvoltage_target", spec.feeder.overvoltage_target);
  }
  spec.new_pcc = exp.integer("new_pcc", spec.new_pcc);
  spec.fit_seed = exp.seed("fit_seed", spec.fit_seed);
  spec.fit_excitation = exp.number("fit_excitation", spec.fit_excitation);
  spec.meter_pole = exp.number("meter_pole", spec.meter_pole);
  spec.eta_fraction = exp.number("eta_fraction", spec.eta_fraction);
  spec.lambda = exp.number("lambda", spec.lambda);
  spec.r_curtail = exp.number("r_curtail", spec.r_curtail);
  spec.r_reactive = exp.number("r_reactive", spec.r_reactive);
  spec.rho = exp.number("rho", spec.rho);
  return spec;
}

// ----------------------------------------------------------------------------
// Analyze inputs
// ----------------------------------------------------------------------------

struct AnalyzeInputs {
  LtiPlant plant;
  ControllerConfig controller;
  SymPosDef qbar;
};

[[nodiscard]] inline AnalyzeInputs analyze_inputs_from_config(const Json& doc) {
  const ConfigView root(doc, "");
  detail::allow_sections(root);

  PlantModel plant = plant_from_config(root);
  LtiPlant* lti = std::get_if<LtiPlant>(&plant);
  if (lti == nullptr)
    throw ConfigError("plant.type: the tracking-bound analysis needs a dynamic plant");
  const Eigen::Index n = lti->state_dim();

  ControllerConfig ctrl = controller_from_config(root);
  if (ctrl.h_hat.rows() != lti->output_dim() || ctrl.h_hat.cols() != lti->input_dim())
    throw ConfigError("controller.h_hat: expected a " + std::to_string(lti->output_dim()) + " x " +
                      std::to_string(lti->input_dim()) + " matrix matching the plant");

  SymPosDef qbar = SymPosDef::identity(n);
  if (const auto exp = root.maybe("experiment")) {
    const std::string type = exp->at("type").as_string();
    if (type != "analyze")
      throw ConfigError(exp->join("type") + ": expected \"analyze\" for this command");
    exp->allow_keys({"type", "qbar"});
    if (const auto f = exp->maybe("qbar")) {
      Matrix m = f->as_matrix();
      if (m.rows() != n || m.cols() != n)
        throw ConfigError(f->path() + ": expected a " + std::to_string(n) + " x " +
                          std::to_string(n) + " matrix");
      qbar = detail::with_path(f->path(), [&] { return SymPosDef(std::move(m)); });
    }
  }
  return {std::move(*lti), std::move(ctrl), std::move(qbar)};
}

}  // namespace rfo
