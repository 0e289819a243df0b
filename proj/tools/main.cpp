#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "confound/errors.hpp"
#include "confound/estimators.hpp"
#include "confound/experiment.hpp"
#include "confound/matrix_io.hpp"
#include "confound/model.hpp"

namespace {

using namespace confound;

constexpr int kUsage = 1;
constexpr int kNumerical = 2;

std::string sibling_path(const std::string& out, const std::string& tag) {
  const auto slash = out.find_last_of('/');
  const auto dot = out.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return out + "." + tag + ".csv";
  }
  return out.substr(0, dot) + "." + tag + out.substr(dot);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
  return out;
}

struct GenerateArgs {
  int d = 100;
  double gamma = 0.5;
  double gamma_tilde = 1.2;
  double c = 1.0 / 3.0;
  std::optional<double> zeta;
  std::optional<double> theta;
  double sigma_beta = 1.0;
  double sigma_eps = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  if (a.zeta && a.theta) fail(ErrorKind::InvalidInput, "--zeta and --theta are exclusive");
  Rng rng(a.seed);
  const CausalModel model =
      a.theta ? build_model_with_theta(a.d, a.gamma_tilde, a.c, *a.theta, a.sigma_beta,
                                       a.sigma_eps, rng)
              : build_model(a.d, a.gamma_tilde, a.c, a.zeta.value_or(0.5), a.sigma_beta,
                            a.sigma_eps, rng);
  const ObservationalData data = draw_observations(model, samples_for(a.d, a.gamma), rng);
  write_dataset(a.out + ".x.csv", a.out + ".y.csv", data);
  write_model(a.out, model);
  const GroundTruth gt = ground_truth(model);
  std::cout << "d,n,zeta_true,tau_pop,theta_true\n"
            << model.dim() << ',' << data.samples() << ',' << format_double(gt.zeta) << ','
            << format_double(gt.tau_pop) << ',' << format_double(gt.theta_true) << '\n';
  return 0;
}

struct EstimateArgs {
  std::string x, y, model;
  double theta_cap = 100.0;
};

int run_estimate(const EstimateArgs& a) {
  const ObservationalData data = read_dataset(a.x, a.y);
  const SampleAnalysis sample(data);
  EstimatorConfig config;
  config.theta_cap = a.theta_cap;

  std::optional<AlignedSpectrum> pop;
  double zeta_true = std::numeric_limits<double>::quiet_NaN();
  if (!a.model.empty()) {
    const CausalModel model = read_model(a.model);
    if (model.dim() != data.dim()) fail(ErrorKind::InvalidInput, "model and dataset dimensions differ");
    pop = population_form(model);
    zeta_true = ground_truth(model).zeta;
  }
  const EstimateSet est = estimate_all(sample, pop ? &*pop : nullptr, config);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ConfoundingEstimate none{};

  std::cout << "d,n,gamma,S,zeta_true,zeta_pop,zeta_plugin,zeta_tcorr,zeta_rmt,tau_pop,tau_plugin,"
               "tau_rmt,theta_pop,theta_plugin,theta_rmt,root_found_plugin,root_found_rmt,"
               "degenerate_flag\n";
  const ConfoundingEstimate& p = est.population ? *est.population : none;
  const bool has_pop = est.population.has_value();
  const bool degenerate = est.plugin.degenerate || est.rmt.degenerate || (has_pop && p.degenerate);
  std::cout << sample.dim() << ',' << sample.samples() << ',' << format_double(sample.gamma())
            << ',' << format_double(sample.noise()) << ',' << format_double(zeta_true) << ','
            << format_double(has_pop ? p.zeta : nan) << ',' << format_double(est.plugin.zeta) << ','
            << format_double(est.tau_corrected.zeta) << ',' << format_double(est.rmt.zeta) << ','
            << format_double(has_pop ? p.tau : nan) << ',' << format_double(est.plugin.tau) << ','
            << format_double(est.rmt.tau) << ',' << format_double(has_pop ? p.theta : nan) << ','
            << format_double(est.plugin.theta) << ',' << format_double(est.rmt.theta) << ','
            << est.plugin.diagnostics.root_found << ',' << est.rmt.diagnostics.root_found << ','
            << degenerate << '\n';
  return 0;
}

struct GridArgs {
  std::string config, out;
  int threads = 0;
  bool timing = false;
};

int run_grid_command(const GridArgs& a) {
  ExperimentGrid grid = load_grid_config(a.config);
  if (!a.out.empty()) grid.out_path = a.out;
  const std::vector<GridRow> rows = run_grid(grid, {a.threads, a.timing});

  std::ofstream out = open_output(grid.out_path);
  write_rows_csv(out, rows);
  std::ofstream summary = open_output(sibling_path(grid.out_path, "summary"));
  write_summary_csv(summary, summarize(rows));

  std::size_t failed = 0;
  for (const GridRow& r : rows) failed += !r.error.empty();
  if (failed > 0) {
    const std::string path = sibling_path(grid.out_path, "errors");
    std::ofstream errors = open_output(path);
    write_errors_csv(errors, rows);
    std::cerr << failed << " of " << rows.size() << " replicates failed; see " << path << '\n';
  }
  return 0;
}

struct OracleArgs {
  double tol = 0.05;
  int d = 2000;
  std::uint64_t seed = 1;
};

int run_oracle_check(const OracleArgs& a) {
  bool all = true;
  for (const OracleCheck& c : run_oracle_checks(a.tol, a.d, a.seed)) {
    all = all && c.pass;
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " empirical=" << format_double(c.empirical)
              << " limit=" << format_double(c.limit) << " tol=" << format_double(c.tolerance) << '\n';
  }
  return all ? 0 : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confounding-strength estimation in high-dimensional linear models"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Draw one model and dataset and write them to files");
  g->add_option("--d", gen.d, "Feature dimension")->check(CLI::PositiveNumber);
  g->add_option("--gamma", gen.gamma, "d/n ratio")->check(CLI::Range(0.0, 1.0));
  g->add_option("--gamma-tilde", gen.gamma_tilde, "l/d ratio");
  g->add_option("--c", gen.c, "Marchenko-Pastur ratio of the covariance spectrum");
  g->add_option("--zeta", gen.zeta, "Target confounding strength (default 0.5)");
  g->add_option("--theta", gen.theta, "Fix sigma_alpha/sigma_beta instead of zeta");
  g->add_option("--sigma-beta", gen.sigma_beta, "Prior variance of beta");
  g->add_option("--sigma-eps", gen.sigma_eps, "Noise variance");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--out", gen.out, "Output prefix")->required();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Run all estimators on a dataset");
  e->add_option("--x", est.x, "Features CSV (d x n)")->required();
  e->add_option("--y", est.y, "Responses CSV (n values)")->required();
  e->add_option("--theta-cap", est.theta_cap, "Upper end of the theta search");
  e->add_option("--model", est.model, "Model prefix; enables the population estimator");

  GridArgs grid;
  auto* r = app.add_subcommand("grid", "Run a Monte Carlo grid from a config file");
  r->add_option("--config", grid.config, "Config file")->required();
  r->add_option("--out", grid.out, "Results CSV (overrides out_path)");
  r->add_option("--threads", grid.threads, "Worker threads");
  r->add_flag("--timing", grid.timing, "Record per-replicate runtime_ms");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle-check", "Compare empirical curves with limiting formulas");
  o->add_option("--tol", oracle.tol, "Absolute tolerance");
  o->add_option("--d", oracle.d, "Dimension");
  o->add_option("--seed", oracle.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*g) return run_generate(gen);
    if (*e) return run_estimate(est);
    if (*r) return run_grid_command(grid);
    if (*o) return run_oracle_check(oracle);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return err.kind() == ErrorKind::InvalidInput ? kUsage : kNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
