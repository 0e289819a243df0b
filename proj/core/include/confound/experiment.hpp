#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "confound/model.hpp"

namespace confound {

enum class ZetaMode {
  Fixed,       // zeta' = zeta_fixed in every replicate
  Uniform,     // zeta' ~ U[0, 1)
  FixedTheta,  // sigma_alpha2 = theta_fixed * sigma_beta2
};

struct ExperimentGrid {
  std::vector<int> d_values{100, 250, 500, 1000};
  std::vector<double> gamma_values{0.1, 0.3, 0.5, 0.7, 0.9};
  double gamma_tilde = 1.2;
  double c = 1.0 / 3.0;
  ZetaMode zeta_mode = ZetaMode::Uniform;
  double zeta_fixed = 0.5;
  double theta_fixed = 1.0;
  double sigma_beta_min = 0.0;
  double sigma_beta_max = 3.0;
  double sigma_eps2 = 1.0;
  int replicates = 25;
  std::uint64_t master_seed = 0;
  double theta_cap = 100.0;
  bool include_population = true;
  std::string out_path = "results.csv";
  int threads = 0;  // 0: THREADS environment variable, else 1
  AlphaCalibration sigma_alpha_formula = AlphaCalibration::Exact;

  /// Raises InvalidInput on any violated invariant, including n = round(d/gamma) <= d.
  void validate() const;
};

/// Flat "key = value" text; lists comma-separated; '#' starts a comment.
/// Unknown keys raise InvalidInput.
ExperimentGrid parse_grid_config(std::istream& in);
ExperimentGrid load_grid_config(const std::string& path);

Eigen::Index samples_for(int d, double gamma);

/// master_seed xor a splitmix64 hash of the cell and replicate indices.
std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t d_index,
                             std::size_t gamma_index, int replicate);

struct GridRow {
  int d = 0;
  Eigen::Index n = 0;
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double c = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double zeta_true = 0.0;
  double zeta_pop = 0.0;
  double zeta_plugin = 0.0;
  double zeta_tcorr = 0.0;
  double zeta_rmt = 0.0;
  double tau_pop = 0.0;
  double tau_plugin = 0.0;
  double tau_rmt = 0.0;
  double theta_true = 0.0;
  double theta_pop = 0.0;
  double theta_plugin = 0.0;
  double theta_rmt = 0.0;
  double sigma_alpha = 0.0;
  double sigma_beta = 0.0;
  double S = 0.0;
  bool degenerate_flag = false;
  bool root_found_rmt = false;
  double runtime_ms = 0.0;
  /// Empty on success; otherwise "<ErrorKind>: message" and the affected
  /// estimate columns are NaN.
  std::string error;
};

const std::vector<std::string>& grid_row_columns();

struct RunOptions {
  int threads = 0;      // overrides the grid's setting when > 0
  bool timing = false;  // fill runtime_ms (otherwise 0, keeping output byte-stable)
};

GridRow run_replicate(const ExperimentGrid& grid, std::size_t d_index, std::size_t gamma_index,
                      int replicate, bool timing = false);

/// Rows ordered by (d index, gamma index, replicate) regardless of thread count.
std::vector<GridRow> run_grid(const ExperimentGrid& grid, const RunOptions& options = {});

void write_rows_csv(std::ostream& out, const std::vector<GridRow>& rows);
/// d, gamma, replicate, error for rows that failed.
void write_errors_csv(std::ostream& out, const std::vector<GridRow>& rows);

struct EstimatorSummary {
  double bias = 0.0;
  double mae = 0.0;
  double se = 0.0;  // standard error of the mean signed error
  int count = 0;
};

struct CellSummary {
  int d = 0;
  Eigen::Index n = 0;
  double gamma = 0.0;
  int replicates = 0;
  int failures = 0;
  EstimatorSummary pop, plugin, tcorr, rmt;
};

/// Per (d, gamma) cell in first-appearance order; rows with NaN for an
/// estimator are left out of that estimator's statistics.
std::vector<CellSummary> summarize(const std::vector<GridRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells);

}  // namespace confound

namespace confound {

struct OracleCheck {
  std::string name;
  double empirical = 0.0;
  double limit = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Empirical counterparts at dimension d against the limiting expressions:
/// MP moments, f_pop, f_plugin and the mixed traces, on theta in {0.5, 1, 2}.
std::vector<OracleCheck> run_oracle_checks(double tolerance, int d, std::uint64_t seed);

}  // namespace confound
