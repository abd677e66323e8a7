#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rfo/config.hpp"

namespace {

using namespace rfo;

const std::string kStaticScenario = R"({
  "plant": {"type": "static", "h": [[1.0, 0.25], [0.0, 1.0]]},
  "signals": {
    "horizon": 40,
    "d": {"type": "constant", "value": [0.3, -0.8]},
    "r": {"type": "sinusoid", "offset": [0.1, 0.0], "amplitude": [0.05, 0.2], "period": 12.0}
  },
  "controller": {
    "variant": "robust_l1",
    "eta": 0.1,
    "lambda": 2.0,
    "h_hat": [[1.0, 0.25], [0.0, 1.0]],
    "r_weight": 0.5,
    "rho": 0.2,
    "u0": [0.1, -0.1],
    "box": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}
  }
})";

const std::string kDynamicScenario = R"({
  "plant": {
    "type": "dynamic",
    "a": [[0.5, 0.1], [0.0, 0.4]],
    "b": [[1.0], [0.5]],
    "c": [[1.0, 0.0]],
    "x0": [0.2, -0.1]
  },
  "signals": {
    "horizon": 60,
    "d": {"type": "constant", "value": [0.4]},
    "d_x": {"type": "constant", "value": [0.05, 0.0]},
    "r": {"type": "constant", "value": [1.0]}
  },
  "controller": {"variant": "standard", "eta": 0.05, "h_hat": [[2.75]]}
})";

// Message of the ConfigError a callable raises; empty when it does not throw.
template <typename Fn>
std::string config_error(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("float formatting survives a parse round trip", "[config]") {
  for (const double x : {0.8, 1.0, 1.0 / 3.0, -2.5e-17, 1e300, 0.1 + 0.2}) {
    const std::string s = format_double(x);
    REQUIRE(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("config hash is invariant to spelling and layout, not to content", "[config]") {
  const ParsedConfig a = parse_config(R"({"experiment": {"type": "sigma", "pole": 0.8}})");
  const ParsedConfig b = parse_config("{\n  \"experiment\": {\"type\": \"sigma\",\n    \"pole\": 8e-1}\n}");
  const ParsedConfig c = parse_config(R"({"experiment": {"type": "sigma", "pole": 0.80000000000000004}})");
  CHECK(a.hash == b.hash);
  CHECK(a.hash == c.hash);
  CHECK(a.hash.size() == 16);
  CHECK(a.hash.find_first_not_of("0123456789abcdef") == std::string::npos);

  const ParsedConfig other = parse_config(R"({"experiment": {"type": "sigma", "pole": 0.81}})");
  CHECK(other.hash != a.hash);

  // Key order is part of the document identity.
  const ParsedConfig swapped = parse_config(R"({"experiment": {"pole": 0.8, "type": "sigma"}})");
  CHECK(swapped.hash != a.hash);
}

TEST_CASE("canonical and pretty dumps reconstruct the same document", "[config]") {
  const ParsedConfig pc = parse_config(kStaticScenario);
  const ParsedConfig canon = parse_config(canonical_dump(pc.doc));
  const ParsedConfig pretty = parse_config(pretty_dump(pc.doc));
  CHECK(canon.hash == pc.hash);
  CHECK(pretty.hash == pc.hash);
  CHECK(canonical_dump(canon.doc) == canonical_dump(pc.doc));

  // Strings escape canonically, including control characters.
  Json j;
  j["s"] = std::string("a\"b\\c\nd\te\x01") + "f";
  const std::string dumped = canonical_dump(j);
  CHECK(dumped == "{\"s\":\"a\\\"b\\\\c\\nd\\te\\u0001f\"}");
  CHECK(Json::parse(dumped)["s"] == j["s"]);

  // Non-finite numbers travel as quoted words.
  Json inf_doc;
  inf_doc["gap"] = std::numeric_limits<double>::infinity();
  CHECK(canonical_dump(inf_doc) == "{\"gap\":\"inf\"}");
}

TEST_CASE("static scenario config builds the exact library objects", "[config]") {
  const ParsedConfig pc = parse_config(kStaticScenario);
  const Scenario sc = scenario_from_config(pc.doc);

  REQUIRE(std::holds_alternative<StaticPlant>(sc.plant));
  Matrix h(2, 2);
  h << 1.0, 0.25, 0.0, 1.0;
  CHECK(std::get<StaticPlant>(sc.plant).h() == h);

  CHECK(sc.controller.variant == ControllerVariant::robust_l1);
  CHECK(sc.controller.eta == 0.1);
  CHECK(sc.controller.lambda == 2.0);
  CHECK(sc.controller.r_weight.matrix() == Matrix(0.5 * Matrix::Identity(2, 2)));
  CHECK(sc.controller.q_weight.matrix() == Matrix(Matrix::Identity(2, 2)));
  REQUIRE(sc.controller.reg.has_value());
  CHECK(std::get<L1Reg>(*sc.controller.reg).rho_col == Vector(Vector::Constant(2, 0.2)));
  REQUIRE(sc.controller.box.has_value());
  CHECK(sc.controller.box->lo == Vector(Vector::Constant(2, -1.0)));
  CHECK(sc.u0 == Vector((Vector(2) << 0.1, -0.1).finished()));

  REQUIRE(sc.signals.horizon == 40);
  CHECK(sc.signals.d_y == constant_signal(40, (Vector(2) << 0.3, -0.8).finished()));
  const std::vector<Vector> r_expected = sinusoid_signal(
      40, (Vector(2) << 0.1, 0.0).finished(), (Vector(2) << 0.05, 0.2).finished(), 12.0);
  REQUIRE(sc.signals.r.size() == r_expected.size());
  for (std::size_t k = 0; k < r_expected.size(); ++k) CHECK(sc.signals.r[k] == r_expected[k]);

  // Omitted signals section: default horizon, zero schedules.
  const ParsedConfig bare = parse_config(R"({
    "plant": {"type": "static", "h": [[1.0]]},
    "controller": {"variant": "standard", "eta": 0.1, "h_hat": [[1.0]]}
  })");
  const Scenario sc_bare = scenario_from_config(bare.doc);
  CHECK(sc_bare.signals.horizon == kDefaultHorizon);
  CHECK(sc_bare.signals.d_y == constant_signal(kDefaultHorizon, Vector::Zero(1)));
  CHECK(sc_bare.signals.r == constant_signal(kDefaultHorizon, Vector::Zero(1)));
}

TEST_CASE("dynamic scenario config wires state, schedules, and x0", "[config]") {
  const ParsedConfig pc = parse_config(kDynamicScenario);
  const Scenario sc = scenario_from_config(pc.doc);

  REQUIRE(std::holds_alternative<LtiPlant>(sc.plant));
  const LtiPlant& plant = std::get<LtiPlant>(sc.plant);
  CHECK(plant.state_dim() == 2);
  CHECK(plant.input_dim() == 1);
  CHECK(plant.output_dim() == 1);
  CHECK(sc.x0 == Vector((Vector(2) << 0.2, -0.1).finished()));
  CHECK(sc.signals.d_x == constant_signal(60, (Vector(2) << 0.05, 0.0).finished()));

  TrajectoryLog log = run(sc);
  REQUIRE(log.status == RunStatus::completed);
  tracking_metrics(log, sc);
  CHECK(log.steps == 60);
}

TEST_CASE("config diagnostics name the offending field path", "[config]") {
  const auto scenario_of = [](const std::string& text) {
    return scenario_from_config(parse_config(text).doc);
  };

  CHECK(config_error([&] { (void)parse_config(R"({"plant": )"); })
            .find("parse error at line 1") == 0);
  CHECK(config_error([&] { (void)parse_config(R"([1, 2])"); }) == "top level: expected an object");
  CHECK(config_error([&] { (void)parse_config(R"({"plan": {}})"); }) == "plan: unknown field");

  CHECK(config_error([&] { (void)scenario_of(R"({"controller": {}})"); }) ==
        "plant: missing required field");
  CHECK(config_error([&] {
          (void)scenario_of(R"({"plant": {"type": "affine"}})");
        }) == "plant.type: expected \"static\" or \"dynamic\"");
  CHECK(config_error([&] {
          (void)scenario_of(R"({"plant": {"type": "static", "h": [[1.0], [2.0, 3.0]]}})");
        }) == "plant.h[1]: expected 1 entries to match row 0");
  CHECK(config_error([&] {
          (void)scenario_of(R"({"plant": {"type": "static", "h": [[1.0, "x"]]}})");
        }) == "plant.h[0][1]: expected a number");
  CHECK(config_error([&] {
          (void)scenario_of(
              R"({"plant": {"type": "static", "h": [[1.0]], "x0": [0.0]},
                  "controller": {"variant": "standard", "eta": 0.1, "h_hat": [[1.0]]}})");
        }) == "plant.x0: a static plant has no state");
  CHECK(config_error([&] {
          (void)scenario_of(
              R"({"plant": {"type": "dynamic", "a": [[1.2]], "b": [[1.0]], "c": [[1.0]]},
                  "controller": {"variant": "standard", "eta": 0.1, "h_hat": [[1.0]]}})");
        }) == "plant: LtiPlant: spectral radius of A must be < 1 - 1e-9");

  const std::string plant_prefix = R"({"plant": {"type": "static", "h": [[1.0]]}, "controller": )";
  CHECK(config_error([&] { (void)scenario_of(plant_prefix + R"({"variant": "standard"}})"); }) ==
        "controller.eta: missing required field");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix + R"({"variant": "prox", "eta": 0.1, "h_hat": [[1.0]]}})");
        }) == "controller.variant: expected \"standard\", \"robust_l2\", or \"robust_l1\"");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix +
                            R"({"variant": "standard", "eta": 0.1, "h_hat": [[1.0]], "rho": 0.2}})");
        }) == "controller.rho: the standard variant takes no regularizer");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix +
                            R"({"variant": "robust_l2", "eta": 0.1, "h_hat": [[1.0]]}})");
        }) == "controller.rho: missing required field");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix +
                            R"({"variant": "robust_l2", "eta": 0.1, "h_hat": [[1.0]], "rho": -0.1}})");
        }) == "controller.rho: must be >= 0");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix + R"({"variant": "standard", "eta": 0.1,
                            "h_hat": [[1.0]], "etaa": 1.0}})");
        }) == "controller.etaa: unknown field");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix + R"({"variant": "standard", "eta": 0.1,
                            "h_hat": [[1.0, 2.0]]}})");
        }) == "controller.h_hat: expected a 1 x 1 matrix matching the plant");
  CHECK(config_error([&] {
          (void)scenario_of(plant_prefix + R"({"variant": "standard", "eta": 0.1, "h_hat": [[1.0]],
                            "box": {"lo": [1.0], "hi": [-1.0]}}})");
        }) == "controller.box: Box: lo <= hi required");

  const std::string through_signals =
      R"({"plant": {"type": "static", "h": [[1.0]]},
          "controller": {"variant": "standard", "eta": 0.1, "h_hat": [[1.0]]},
          "signals": )";
  CHECK(config_error([&] { (void)scenario_of(through_signals + R"({"horizon": 40.0}})"); }) ==
        "signals.horizon: expected an integer");
  CHECK(config_error([&] {
          (void)scenario_of(through_signals +
                            R"({"horizon": 4, "d": {"type": "constant", "value": [1.0, 2.0]}}})");
        }) == "signals.d.value: expected 1 entries");
  CHECK(config_error([&] {
          (void)scenario_of(through_signals +
                            R"({"horizon": 4, "d_x": {"type": "constant", "value": [1.0]}}})");
        }) == "signals.d_x: a static plant takes no state disturbance");
  CHECK(config_error([&] {
          (void)scenario_of(through_signals + R"({"horizon": 4, "r": {"type": "sinusoid",
                            "offset": [0.0], "amplitude": [1.0], "period": 0.0}}})");
        }) == "signals.r.period: must be > 0");
}

TEST_CASE("sweep specs inherit defaults and honor overrides", "[config]") {
  const SigmaSweepSpec dflt;
  const ParsedConfig bare = parse_config(R"({"experiment": {"type": "sigma"}})");
  const SigmaSweepSpec spec = sigma_spec_from_config(bare.doc, 1, 0);
  CHECK(spec.dim == dflt.dim);
  CHECK(spec.sigmas == dflt.sigmas);
  CHECK(spec.seeds == dflt.seeds);
  CHECK(spec.pole == dflt.pole);
  CHECK(spec.eta_fraction == dflt.eta_fraction);
  CHECK(spec.horizon == dflt.horizon);

  const ParsedConfig tuned = parse_config(R"({"experiment": {
    "type": "sigma", "dim": 2, "sigmas": [0.0, 1.0], "seed_count": 3,
    "instance_seed": 7, "lambda": 2.0, "pole": 0.5, "eta_fraction": 0.4, "horizon": 100}})");
  const SigmaSweepSpec over = sigma_spec_from_config(tuned.doc, 4, 10);
  CHECK(over.dim == 2);
  CHECK(over.sigmas == std::vector<double>{0.0, 1.0});
  CHECK(over.seeds == std::vector<std::uint64_t>{11, 12, 13});
  CHECK(over.instance_seed == 7);
  CHECK(over.lambda == 2.0);
  CHECK(over.pole == 0.5);
  CHECK(over.eta_fraction == 0.4);
  CHECK(over.horizon == 100);
  CHECK(over.jobs == 4);

  const DimSweepSpec dim_dflt;
  const ParsedConfig dim_doc = parse_config(
      R"({"experiment": {"type": "dim", "dims": [1, 2, 3], "seed_count": 5}})");
  const DimSweepSpec dim_spec = dim_spec_from_config(dim_doc.doc, 2, 100);
  CHECK(dim_spec.dims == std::vector<Eigen::Index>{1, 2, 3});
  CHECK(dim_spec.seeds == std::vector<std::uint64_t>{101, 102, 103, 104, 105});
  CHECK(dim_spec.pole == dim_dflt.pole);

  CHECK(config_error([&] { (void)dim_spec_from_config(bare.doc, 1, 0); }) ==
        "experiment.type: expected \"dim\" for sweep-dim");
  CHECK(config_error([&] { (void)sigma_spec_from_config(dim_doc.doc, 1, 0); }) ==
        "experiment.type: expected \"sigma\" for sweep-sigma");
  CHECK(config_error([&] {
          (void)sigma_spec_from_config(
              parse_config(R"({"experiment": {"type": "sigma", "seed_count": 0}})").doc, 1, 0);
        }) == "experiment.seed_count: must be >= 1");
}

TEST_CASE("grid spec extraction mirrors the built-in defaults", "[config]") {
  const GridCaseSpec dflt;
  const ParsedConfig bare = parse_config(R"({"experiment": {"type": "grid"}})");
  const GridCaseSpec spec = grid_spec_from_config(bare.doc);
  CHECK(spec.feeder.buses == dflt.feeder.buses);
  CHECK(spec.feeder.pv_count == dflt.feeder.pv_count);
  CHECK(spec.feeder.horizon == dflt.feeder.horizon);
  CHECK(spec.new_pcc == dflt.new_pcc);
  CHECK(spec.meter_pole == dflt.meter_pole);
  CHECK(spec.eta_fraction == dflt.eta_fraction);
  CHECK(spec.lambda == dflt.lambda);
  CHECK(spec.rho == dflt.rho);

  const ParsedConfig tuned = parse_config(R"({"experiment": {
    "type": "grid",
    "feeder": {"buses": 8, "pv_count": 3, "horizon": 120, "seed": 2},
    "new_pcc": 4, "fit_seed": 9, "meter_pole": 0.6, "rho": 0.3}})");
  const GridCaseSpec over = grid_spec_from_config(tuned.doc);
  CHECK(over.feeder.buses == 8);
  CHECK(over.feeder.pv_count == 3);
  CHECK(over.feeder.horizon == 120);
  CHECK(over.feeder.seed == 2);
  CHECK(over.new_pcc == 4);
  CHECK(over.fit_seed == 9);
  CHECK(over.meter_pole == 0.6);
  CHECK(over.rho == 0.3);

  CHECK(config_error([&] {
          (void)grid_spec_from_config(
              parse_config(R"({"experiment": {"type": "grid", "fit_seed": -1}})").doc);
        }) == "experiment.fit_seed: seed must be >= 0");
}

TEST_CASE("run options pick the metrics mode and uncertainty set", "[config]") {
  const ParsedConfig bare = parse_config(kStaticScenario);
  const RunOptions dflt = run_options_from_config(bare.doc, 2);
  CHECK(dflt.metrics == OptimizerMode::regularized);
  CHECK(!dflt.set.has_value());

  Json doc = bare.doc;
  doc["experiment"] = Json{{"type", "run"}, {"metrics", "robust"}};
  CHECK(config_error([&] { (void)run_options_from_config(doc, 2); }) ==
        "uncertainty: robust metrics need an uncertainty section");

  doc["uncertainty"] = Json{{"type", "gen"}, {"rho", 0.3}};
  const RunOptions robust = run_options_from_config(doc, 2);
  CHECK(robust.metrics == OptimizerMode::robust);
  REQUIRE(robust.set.has_value());
  CHECK(std::get<GenUncertainty>(*robust.set).rho == 0.3);

  doc["uncertainty"] = Json{{"type", "col"}, {"rho", Json::array({0.1, 0.2})}};
  const RunOptions col = run_options_from_config(doc, 2);
  REQUIRE(col.set.has_value());
  CHECK(std::get<ColUncertainty>(*col.set).rho == Vector((Vector(2) << 0.1, 0.2).finished()));

  doc["experiment"] = Json{{"type", "sigma"}};
  CHECK(config_error([&] { (void)run_options_from_config(doc, 2); }) ==
        "experiment.type: expected \"run\" for this command");

  doc["experiment"] = Json{{"type", "run"}, {"metrics", "exact"}};
  CHECK(config_error([&] { (void)run_options_from_config(doc, 2); }) ==
        "experiment.metrics: expected \"nominal\", \"regularized\", or \"robust\"");
}

TEST_CASE("analyze inputs require a dynamic plant and accept a custom weight", "[config]") {
  const ParsedConfig pc = parse_config(kDynamicScenario);
  const AnalyzeInputs inputs = analyze_inputs_from_config(pc.doc);
  CHECK(inputs.plant.state_dim() == 2);
  CHECK(inputs.qbar.matrix() == Matrix(Matrix::Identity(2, 2)));

  Json doc = pc.doc;
  doc["experiment"] =
      Json{{"type", "analyze"},
           {"qbar", Json::array({Json::array({2.0, 0.0}), Json::array({0.0, 1.0})})}};
  const AnalyzeInputs weighted = analyze_inputs_from_config(doc);
  CHECK(weighted.qbar.matrix()(0, 0) == 2.0);

  CHECK(config_error([&] { (void)analyze_inputs_from_config(parse_config(kStaticScenario).doc); }) ==
        "plant.type: the tracking-bound analysis needs a dynamic plant");
}

TEST_CASE("csv tables render bit-stably and parse back exactly", "[config]") {
  const ParsedConfig pc = parse_config(kStaticScenario);
  const Scenario sc = scenario_from_config(pc.doc);
  TrajectoryLog log = run(sc);
  tracking_metrics(log, sc);

  const std::string csv = trajectory_csv(log, pc.hash);
  CHECK(csv == trajectory_csv(log, pc.hash));

  const CsvTable table = parse_csv(csv);
  REQUIRE(table.comments.size() == 1);
  CHECK(table.comments[0] == "scenario=" + pc.hash);
  CHECK(table.header == std::vector<std::string>{"k", "u0", "u1", "y0", "y1", "gap", "err_u", "err_x_P"});
  REQUIRE(table.rows.size() == static_cast<std::size_t>(log.steps));
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    CHECK(table.rows[k][0] == static_cast<double>(k));
    CHECK(table.rows[k][1] == log.u[k](0));
    CHECK(table.rows[k][2] == log.u[k](1));
    CHECK(table.rows[k][5] == log.gap[k]);
  }

  const std::vector<SigmaCell> sigma_cells{
      {0.0, 1, 1.25e-9, 2.5e-9, false},
      {3.2, 2, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), true}};
  const std::string sigma = sigma_csv(sigma_cells, pc.hash);
  const CsvTable sigma_table = parse_csv(sigma);
  CHECK(sigma_table.header == std::vector<std::string>{"sigma", "seed", "final_gap", "mean_gap", "diverged"});
  REQUIRE(sigma_table.rows.size() == 2);
  CHECK(sigma_table.rows[0][2] == 1.25e-9);
  CHECK(std::isinf(sigma_table.rows[1][2]));
  CHECK(sigma_table.rows[1][4] == 1.0);

  const std::vector<DimCell> dim_cells{{3, 7, 0.5, 0.25, false}};
  const CsvTable dim_table = parse_csv(dim_csv(dim_cells, pc.hash));
  CHECK(dim_table.header == std::vector<std::string>{"m", "seed", "final_gap", "diverged"});
  CHECK(dim_table.rows[0][0] == 3.0);
  CHECK(dim_table.rows[0][2] == 0.5);

  BoundReport report;
  report.lhs = {1.0, 2.0};
  report.rhs = {3.0, 4.0};
  report.margin = {2.0, 2.0};
  CHECK(bound_csv(report, pc.hash) ==
        "# config=" + pc.hash + "\nk,lhs,rhs,margin\n0,1,3,2\n1,2,4,2\n");

  CHECK_THROWS_AS(parse_csv("a,b\n1,oops\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_csv("# only a comment\n"), InvalidArgument);
}

TEST_CASE("file round trip preserves bytes", "[config]") {
  const std::string path = "config_io_roundtrip.tmp";
  const std::string content = "line one\nvalue,0.80000000000000004\n";
  write_file(path, content);
  CHECK(read_file(path) == content);
  CHECK_THROWS_AS(read_file("missing_directory/nope.csv"), InvalidArgument);
  std::remove(path.c_str());
}
