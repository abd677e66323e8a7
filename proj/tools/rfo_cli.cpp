#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rfo/config.hpp"

// ============================================================================
// Command-line frontend
// ============================================================================
//
// Subcommands: run, sweep-sigma, sweep-dim, grid, analyze. Every command
// loads one JSON config, writes artifacts named by the config hash into
// --out, and reports through the exit code:
//
//   0  completed
//   1  unreadable or invalid config (diagnostic names the field or line)
//   2  a closed-loop run diverged (run/grid)
//   3  the tracking bound does not apply at the configured step size
//
// Re-running any command with the same config and build reproduces every
// output file byte for byte.

namespace {

namespace fs = std::filesystem;

struct Opts {
  std::string config_path;
  std::string out_dir = "./out";
  int jobs = 1;
  std::uint64_t seed_offset = 0;
};

void add_common(CLI::App* cmd, Opts& opts) {
  cmd->add_option("--config", opts.config_path, "Path to the JSON config")->required();
  cmd->add_option("--out", opts.out_dir, "Output directory (created if missing)")
      ->capture_default_str();
  cmd->add_option("--jobs", opts.jobs, "Sweep worker threads; tables are identical for any value")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed-offset", opts.seed_offset,
                  "Added to every sweep worker seed; other commands ignore it")
      ->capture_default_str();
}

// Short human form for stdout; files always carry the full 17 digits.
std::string disp(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0.0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string variant_name(rfo::ControllerVariant v) {
  switch (v) {
    case rfo::ControllerVariant::standard: return "standard";
    case rfo::ControllerVariant::robust_l2: return "robust_l2";
    case rfo::ControllerVariant::robust_l1: return "robust_l1";
  }
  return "unknown";
}

std::string write_artifact(const Opts& opts, const std::string& name, const std::string& content) {
  fs::create_directories(opts.out_dir);
  const std::string path = (fs::path(opts.out_dir) / name).string();
  rfo::write_file(path, content);
  return path;
}

// Shared summary skeleton; "outputs" lists file names only, so the document
// is identical regardless of --out.
rfo::Json summary_base(const char* command, const rfo::ParsedConfig& pc,
                       std::initializer_list<std::string> outputs) {
  rfo::Json doc;
  doc["command"] = command;
  doc["config_hash"] = pc.hash;
  rfo::Json files = rfo::Json::array();
  for (const std::string& name : outputs) files.push_back(name);
  doc["outputs"] = std::move(files);
  doc["config"] = pc.doc;
  return doc;
}

// ----------------------------------------------------------------------------
// run
// ----------------------------------------------------------------------------

int cmd_run(const Opts& opts) {
  const rfo::ParsedConfig pc = rfo::parse_config_file(opts.config_path);
  const rfo::Scenario sc = rfo::scenario_from_config(pc.doc);
  const rfo::RunOptions ro = rfo::run_options_from_config(pc.doc, rfo::plant_input_dim(sc.plant));

  rfo::TrajectoryLog log = rfo::run(sc);
  rfo::tracking_metrics(log, sc, ro.metrics, std::nullopt, ro.set);
  const rfo::GapSummary gaps = rfo::gap_summary(log);

  const std::string table_name = "run_" + pc.hash + ".csv";
  const std::string summary_name = "run_" + pc.hash + ".json";
  const std::string table_path = write_artifact(opts, table_name, rfo::trajectory_csv(log, pc.hash));

  rfo::Json summary = summary_base("run", pc, {table_name});
  summary["results"]["status"] = log.status == rfo::RunStatus::completed ? "completed" : "diverged";
  summary["results"]["steps"] = log.steps;
  summary["results"]["horizon"] = log.horizon;
  summary["results"]["final_gap"] = gaps.final_gap;
  summary["results"]["tail_mean_gap"] = gaps.tail_mean_gap;
  const std::string summary_path = write_artifact(opts, summary_name, rfo::pretty_dump(summary));

  std::cout << "run " << pc.hash << ": "
            << (log.status == rfo::RunStatus::completed ? "completed" : "diverged") << " after "
            << log.steps << " of " << log.horizon << " steps\n"
            << "final gap " << disp(gaps.final_gap) << ", tail mean gap " << disp(gaps.tail_mean_gap)
            << "\n"
            << "wrote " << table_path << " and " << summary_path << "\n";
  return log.status == rfo::RunStatus::completed ? 0 : 2;
}

// ----------------------------------------------------------------------------
// sweeps
// ----------------------------------------------------------------------------

int cmd_sweep_sigma(const Opts& opts) {
  const rfo::ParsedConfig pc = rfo::parse_config_file(opts.config_path);
  const rfo::SigmaSweepSpec spec = rfo::sigma_spec_from_config(pc.doc, opts.jobs, opts.seed_offset);

  const std::vector<rfo::SigmaCell> table = rfo::sweep_sigma(spec);
  const std::vector<rfo::SigmaMedian> medians = rfo::sigma_medians(spec, table);

  const std::string table_name = "sigma_" + pc.hash + ".csv";
  const std::string summary_name = "sigma_" + pc.hash + ".json";
  const std::string table_path = write_artifact(opts, table_name, rfo::sigma_csv(table, pc.hash));

  rfo::Json summary = summary_base("sweep-sigma", pc, {table_name});
  summary["results"]["cells"] = static_cast<long>(table.size());
  summary["results"]["seed_offset"] = opts.seed_offset;
  rfo::Json rows = rfo::Json::array();
  for (const rfo::SigmaMedian& row : medians) {
    rfo::Json r;
    r["sigma"] = row.sigma;
    r["median_final_gap"] = row.median_final_gap;
    r["median_mean_gap"] = row.median_mean_gap;
    r["diverged"] = row.diverged_count;
    rows.push_back(std::move(r));
  }
  summary["results"]["medians"] = std::move(rows);
  const std::string summary_path = write_artifact(opts, summary_name, rfo::pretty_dump(summary));

  std::cout << "sweep-sigma " << pc.hash << ": " << table.size() << " cells\n";
  for (const rfo::SigmaMedian& row : medians)
    std::cout << "sigma " << disp(row.sigma) << ": median final gap " << disp(row.median_final_gap)
              << ", median mean gap " << disp(row.median_mean_gap) << ", diverged "
              << row.diverged_count << "/" << spec.seeds.size() << "\n";
  std::cout << "wrote " << table_path << " and " << summary_path << "\n";
  return 0;
}

int cmd_sweep_dim(const Opts& opts) {
  const rfo::ParsedConfig pc = rfo::parse_config_file(opts.config_path);
  const rfo::DimSweepSpec spec = rfo::dim_spec_from_config(pc.doc, opts.jobs, opts.seed_offset);

  const std::vector<rfo::DimCell> table = rfo::sweep_dimension(spec);
  const std::vector<rfo::DimMedian> medians = rfo::dim_medians(spec, table);

  const std::string table_name = "dim_" + pc.hash + ".csv";
  const std::string summary_name = "dim_" + pc.hash + ".json";
  const std::string table_path = write_artifact(opts, table_name, rfo::dim_csv(table, pc.hash));

  rfo::Json summary = summary_base("sweep-dim", pc, {table_name});
  summary["results"]["cells"] = static_cast<long>(table.size());
  summary["results"]["seed_offset"] = opts.seed_offset;
  rfo::Json rows = rfo::Json::array();
  for (const rfo::DimMedian& row : medians) {
    rfo::Json r;
    r["m"] = row.dim;
    r["median_final_gap"] = row.median_final_gap;
    r["median_mean_gap"] = row.median_mean_gap;
    r["diverged"] = row.diverged_count;
    rows.push_back(std::move(r));
  }
  summary["results"]["medians"] = std::move(rows);
  const std::string summary_path = write_artifact(opts, summary_name, rfo::pretty_dump(summary));

  std::cout << "sweep-dim " << pc.hash << ": " << table.size() << " cells\n";
  for (const rfo::DimMedian& row : medians)
    std::cout << "m " << row.dim << ": median final gap " << disp(row.median_final_gap)
              << ", diverged " << row.diverged_count << "/" << spec.seeds.size() << "\n";
  std::cout << "wrote " << table_path << " and " << summary_path << "\n";
  return 0;
}

// ----------------------------------------------------------------------------
// grid
// ----------------------------------------------------------------------------

int cmd_grid(const Opts& opts) {
  const rfo::ParsedConfig pc = rfo::parse_config_file(opts.config_path);
  const rfo::GridCaseSpec spec = rfo::grid_spec_from_config(pc.doc);

  const rfo::GridCaseResult result = rfo::grid_case(spec);

  const std::string table_name = "grid_" + pc.hash + ".csv";
  const std::string summary_name = "grid_" + pc.hash + ".json";
  const std::string table_path = write_artifact(opts, table_name, rfo::grid_csv(result, pc.hash));

  rfo::Json summary = summary_base("grid", pc, {table_name});
  summary["results"]["switched_pcc"] = result.switched_pcc;
  summary["results"]["eta"] = result.eta;
  summary["results"]["model_mismatch"] = rfo::operator_norm(result.h_post - result.h_hat);
  rfo::Json rows = rfo::Json::array();
  for (const rfo::GridControllerSummary& s : result.summaries) {
    rfo::Json r;
    r["name"] = s.name;
    r["violation_steps"] = s.violation_steps;
    r["total_curtailment"] = s.total_curtailment;
    r["total_reactive"] = s.total_reactive;
    r["zero_q_total"] = s.zero_q_total;
    r["zero_q_final"] = s.zero_q_final;
    r["diverged"] = s.diverged;
    rows.push_back(std::move(r));
  }
  summary["results"]["controllers"] = std::move(rows);
  const std::string summary_path = write_artifact(opts, summary_name, rfo::pretty_dump(summary));

  bool any_diverged = false;
  std::cout << "grid " << pc.hash << ": slack moved to bus " << result.switched_pcc << ", eta "
            << disp(result.eta) << "\n";
  for (const rfo::GridControllerSummary& s : result.summaries) {
    any_diverged = any_diverged || s.diverged;
    std::cout << s.name << ": " << s.violation_steps << " violation steps, curtailment "
              << disp(s.total_curtailment) << ", reactive " << disp(s.total_reactive) << ", zero-q "
              << s.zero_q_total << " total / " << s.zero_q_final << " final"
              << (s.diverged ? ", diverged" : "") << "\n";
  }
  std::cout << "wrote " << table_path << " and " << summary_path << "\n";
  return any_diverged ? 2 : 0;
}

// ----------------------------------------------------------------------------
// analyze
// ----------------------------------------------------------------------------

// A trajectory table belongs to this config if its header hash matches and
// its input columns replay exactly; anything else is a mismatched log.
void check_log_matches(const rfo::CsvTable& table, const rfo::TrajectoryLog& replay,
                       const std::string& hash, const std::string& log_path) {
  if (table.comments.empty() || table.comments[0] != "scenario=" + hash)
    throw rfo::ConfigError(log_path + ": log was not produced by this config (scenario hash differs)");
  if (table.rows.size() != static_cast<std::size_t>(replay.steps))
    throw rfo::ConfigError(log_path + ": log has " + std::to_string(table.rows.size()) +
                           " rows but the config replays " + std::to_string(replay.steps) + " steps");
  const auto m = static_cast<std::size_t>(replay.u.front().size());
  for (std::size_t k = 0; k < table.rows.size(); ++k)
    for (std::size_t i = 0; i < m; ++i)
      if (table.rows[k][1 + i] != replay.u[k](static_cast<Eigen::Index>(i)))
        throw rfo::ConfigError(log_path + ": row " + std::to_string(k) +
                               " does not match a replay of this config");
}

int cmd_analyze(const Opts& opts, const std::string& log_path) {
  const rfo::ParsedConfig pc = rfo::parse_config_file(opts.config_path);
  const rfo::AnalyzeInputs inputs = rfo::analyze_inputs_from_config(pc.doc);

  const rfo::TheoremConstants tc =
      rfo::compute_constants(inputs.plant, inputs.controller, inputs.qbar, inputs.controller.eta);

  const auto mat = [](const rfo::Matrix& m) { return rfo::canonical_dump(rfo::json_matrix(m)); };
  std::cout << "eta           = " << rfo::format_double(tc.eta) << "\n"
            << "variant       = " << variant_name(tc.variant) << "\n"
            << "h_hat         = " << mat(tc.h_hat) << "\n"
            << "p             = " << mat(tc.p.matrix()) << "\n"
            << "lambda_min_p  = " << rfo::format_double(tc.lambda_min_p) << "\n"
            << "lambda_max_p  = " << rfo::format_double(tc.lambda_max_p) << "\n"
            << "gamma         = " << rfo::format_double(tc.gamma) << "\n"
            << "l_x_u         = " << rfo::format_double(tc.l_x_u) << "\n"
            << "l_x_d         = " << rfo::format_double(tc.l_x_d) << "\n"
            << "l_t_y         = " << rfo::format_double(tc.l_t_y) << "\n"
            << "l_phi_u_prime = " << rfo::format_double(tc.l_phi_u_prime) << "\n"
            << "mu_phi        = " << rfo::format_double(tc.mu_phi) << "\n"
            << "l_phi         = " << rfo::format_double(tc.l_phi) << "\n"
            << "alpha         = " << rfo::format_double(tc.alpha) << "\n"
            << "c1            = " << rfo::format_double(tc.c1) << "\n"
            << "c2            = " << rfo::format_double(tc.c2) << "\n"
            << "c3            = " << rfo::format_double(tc.c3) << "\n"
            << "c4            = " << rfo::format_double(tc.c4) << "\n"
            << "c5            = " << rfo::format_double(tc.c5) << "\n"
            << "c_bar_1       = " << rfo::format_double(tc.c_bar_1) << "\n"
            << "gain          = " << mat(tc.gain) << "\n"
            << "c_m           = " << rfo::format_double(tc.c_m) << "\n"
            << "r1            = " << rfo::format_double(tc.r1) << "\n"
            << "r2            = " << rfo::format_double(tc.r2) << "\n"
            << "eta_star      = " << rfo::format_double(tc.eta_star) << "\n";

  if (!(tc.c_m < 1.0))
    throw rfo::BoundInapplicable("analyze: eta " + rfo::format_double(tc.eta) +
                                 " exceeds the admissible eta* " + rfo::format_double(tc.eta_star) +
                                 " (c_M = " + rfo::format_double(tc.c_m) +
                                 " >= 1); the tracking bound does not apply");

  rfo::Json summary = summary_base("analyze", pc, {});
  rfo::Json constants;
  constants["eta"] = tc.eta;
  constants["variant"] = variant_name(tc.variant);
  constants["h_hat"] = rfo::json_matrix(tc.h_hat);
  constants["p"] = rfo::json_matrix(tc.p.matrix());
  constants["lambda_min_p"] = tc.lambda_min_p;
  constants["lambda_max_p"] = tc.lambda_max_p;
  constants["gamma"] = tc.gamma;
  constants["l_x_u"] = tc.l_x_u;
  constants["l_x_d"] = tc.l_x_d;
  constants["l_t_y"] = tc.l_t_y;
  constants["l_phi_u_prime"] = tc.l_phi_u_prime;
  constants["mu_phi"] = tc.mu_phi;
  constants["l_phi"] = tc.l_phi;
  constants["alpha"] = tc.alpha;
  constants["c1"] = tc.c1;
  constants["c2"] = tc.c2;
  constants["c3"] = tc.c3;
  constants["c4"] = tc.c4;
  constants["c5"] = tc.c5;
  constants["c_bar_1"] = tc.c_bar_1;
  constants["gain"] = rfo::json_matrix(tc.gain);
  constants["c_m"] = tc.c_m;
  constants["r1"] = tc.r1;
  constants["r2"] = tc.r2;
  constants["eta_star"] = tc.eta_star;
  summary["results"]["constants"] = std::move(constants);

  std::vector<std::string> written;
  if (!log_path.empty()) {
    const rfo::Scenario sc = rfo::scenario_from_config(pc.doc);
    rfo::TrajectoryLog replay = rfo::run(sc);
    rfo::tracking_metrics(replay, sc, rfo::OptimizerMode::regularized, inputs.qbar);
    check_log_matches(rfo::parse_csv(rfo::read_file(log_path)), replay, pc.hash, log_path);

    const rfo::BoundReport report =
        rfo::verify_bound(replay, tc, rfo::true_sensitivity(sc.plant));
    double min_margin = std::numeric_limits<double>::infinity();
    for (const double m : report.margin) min_margin = std::min(min_margin, m);

    const std::string bound_name = "bound_" + pc.hash + ".csv";
    written.push_back(write_artifact(opts, bound_name, rfo::bound_csv(report, pc.hash)));
    summary["outputs"].push_back(bound_name);
    summary["results"]["bound"]["holds"] = report.holds;
    summary["results"]["bound"]["steps"] = static_cast<long>(report.lhs.size());
    summary["results"]["bound"]["min_margin"] = min_margin;
    if (report.first_violation)
      summary["results"]["bound"]["first_violation"] = *report.first_violation;

    std::cout << "bound " << (report.holds ? "holds" : "violated") << " over "
              << report.lhs.size() << " steps, min margin " << disp(min_margin);
    if (report.first_violation) std::cout << ", first violation at step " << *report.first_violation;
    std::cout << "\n";
  }

  const std::string summary_name = "analyze_" + pc.hash + ".json";
  summary["outputs"].push_back(summary_name);
  written.push_back(write_artifact(opts, summary_name, rfo::pretty_dump(summary)));
  std::cout << "wrote";
  for (std::size_t i = 0; i < written.size(); ++i) std::cout << (i ? " and " : " ") << written[i];
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust feedback optimization: closed-loop runs, mismatch sweeps, feeder case, bound analysis"};
  app.require_subcommand(1);

  Opts opts;
  std::string log_path;
  CLI::App* c_run = app.add_subcommand("run", "Run one closed-loop scenario and write its trajectory table");
  CLI::App* c_sigma = app.add_subcommand("sweep-sigma", "Sweep the believed-model perturbation magnitude");
  CLI::App* c_dim = app.add_subcommand("sweep-dim", "Sweep the problem dimension at unit model mismatch");
  CLI::App* c_grid = app.add_subcommand("grid", "Compare the three controllers on the re-rooted feeder");
  CLI::App* c_analyze =
      app.add_subcommand("analyze", "Print the tracking-bound constants and verify a logged run");
  for (CLI::App* cmd : {c_run, c_sigma, c_dim, c_grid, c_analyze}) add_common(cmd, opts);
  c_analyze->add_option("--log", log_path, "Trajectory CSV from `run` under this same config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(c_run)) return cmd_run(opts);
    if (app.got_subcommand(c_sigma)) return cmd_sweep_sigma(opts);
    if (app.got_subcommand(c_dim)) return cmd_sweep_dim(opts);
    if (app.got_subcommand(c_grid)) return cmd_grid(opts);
    return cmd_analyze(opts, log_path);
  } catch (const rfo::ConfigError& e) {
    std::cerr << "config error: " << opts.config_path << ": " << e.what() << "\n";
    return 1;
  } catch (const rfo::BoundInapplicable& e) {
    std::cerr << "bound inapplicable: " << e.what() << "\n";
    return 3;
  } catch (const rfo::Error& e) {
    std::cerr << "error: " << opts.config_path << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
