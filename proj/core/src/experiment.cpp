#include "confound/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "confound/errors.hpp"
#include "confound/estimators.hpp"
#include "confound/matrix_io.hpp"

namespace confound {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) fail(ErrorKind::InvalidInput, key + ": not a number: " + v);
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) fail(ErrorKind::InvalidInput, key + ": not an integer: " + v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::InvalidInput, key + ": expected true or false, got " + v);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

int resolve_threads(const ExperimentGrid& grid, const RunOptions& options) {
  if (options.threads > 0) return options.threads;
  if (grid.threads > 0) return grid.threads;
  if (const char* env = std::getenv("THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

void update(EstimatorSummary& s, std::vector<double>& errors) {
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) {
    s.bias = s.mae = s.se = kNaN;
    return;
  }
  double sum = 0.0, abs_sum = 0.0;
  for (double e : errors) {
    sum += e;
    abs_sum += std::abs(e);
  }
  s.bias = sum / s.count;
  s.mae = abs_sum / s.count;
  if (s.count < 2) {
    s.se = 0.0;
    return;
  }
  double ss = 0.0;
  for (double e : errors) ss += (e - s.bias) * (e - s.bias);
  s.se = std::sqrt(ss / (s.count - 1) / s.count);
}

}  // namespace

void ExperimentGrid::validate() const {
  if (d_values.empty() || gamma_values.empty()) {
    fail(ErrorKind::InvalidInput, "d_values and gamma_values must be non-empty");
  }
  for (int d : d_values) {
    if (d < 1) fail(ErrorKind::InvalidInput, "d values must be >= 1");
    for (double g : gamma_values) {
      if (!(g > 0.0 && g < 1.0)) fail(ErrorKind::InvalidInput, "gamma values must lie in (0, 1)");
      if (samples_for(d, g) <= d) {
        fail(ErrorKind::InvalidInput, "cell d=" + std::to_string(d) + " gamma=" +
                                          format_double(g) + " has n <= d");
      }
    }
  }
  if (!(gamma_tilde >= 1.0)) fail(ErrorKind::InvalidInput, "gamma_tilde must be >= 1");
  if (!(c > 0.0 && c < 1.0)) fail(ErrorKind::InvalidInput, "c must lie in (0, 1)");
  if (!(zeta_fixed >= 0.0 && zeta_fixed < 1.0)) fail(ErrorKind::InvalidInput, "zeta_fixed must lie in [0, 1)");
  if (!(theta_fixed >= 0.0)) fail(ErrorKind::InvalidInput, "theta_fixed must be >= 0");
  if (!(sigma_beta_min >= 0.0 && sigma_beta_max >= sigma_beta_min && sigma_beta_max > 0.0)) {
    fail(ErrorKind::InvalidInput, "need 0 <= sigma_beta_min <= sigma_beta_max, sigma_beta_max > 0");
  }
  if (!(sigma_eps2 >= 0.0)) fail(ErrorKind::InvalidInput, "sigma_eps2 must be >= 0");
  if (replicates < 1) fail(ErrorKind::InvalidInput, "replicates must be >= 1");
  if (!(theta_cap > 0.0)) fail(ErrorKind::InvalidInput, "theta_cap must be > 0");
  if (threads < 0) fail(ErrorKind::InvalidInput, "threads must be >= 0");
}

ExperimentGrid parse_grid_config(std::istream& in) {
  ExperimentGrid g;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::InvalidInput, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "d_values") {
      g.d_values.clear();
      for (const auto& v : split_list(value)) g.d_values.push_back(static_cast<int>(to_integer(key, v)));
    } else if (key == "gamma_values") {
      g.gamma_values.clear();
      for (const auto& v : split_list(value)) g.gamma_values.push_back(to_double(key, v));
    } else if (key == "gamma_tilde") {
      g.gamma_tilde = to_double(key, value);
    } else if (key == "c") {
      g.c = to_double(key, value);
    } else if (key == "zeta_mode") {
      if (value == "uniform") {
        g.zeta_mode = ZetaMode::Uniform;
      } else if (value == "fixed") {
        g.zeta_mode = ZetaMode::Fixed;
      } else if (value.rfind("fixed(", 0) == 0 && value.back() == ')') {
        g.zeta_mode = ZetaMode::Fixed;
        g.zeta_fixed = to_double(key, value.substr(6, value.size() - 7));
      } else if (value == "fixed_theta") {
        g.zeta_mode = ZetaMode::FixedTheta;
      } else {
        fail(ErrorKind::InvalidInput, "zeta_mode must be uniform, fixed, fixed(<z>) or fixed_theta");
      }
    } else if (key == "zeta_fixed") {
      g.zeta_fixed = to_double(key, value);
    } else if (key == "theta_fixed") {
      g.theta_fixed = to_double(key, value);
    } else if (key == "sigma_beta_min") {
      g.sigma_beta_min = to_double(key, value);
    } else if (key == "sigma_beta_max") {
      g.sigma_beta_max = to_double(key, value);
    } else if (key == "sigma_eps2") {
      g.sigma_eps2 = to_double(key, value);
    } else if (key == "replicates") {
      g.replicates = static_cast<int>(to_integer(key, value));
    } else if (key == "master_seed") {
      std::size_t used = 0;
      try {
        g.master_seed = std::stoull(value, &used, 0);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || value.empty() || value[0] == '-') {
        fail(ErrorKind::InvalidInput, "master_seed: not an unsigned integer: " + value);
      }
    } else if (key == "theta_cap") {
      g.theta_cap = to_double(key, value);
    } else if (key == "include_population") {
      g.include_population = to_bool(key, value);
    } else if (key == "out_path") {
      g.out_path = value;
    } else if (key == "threads") {
      g.threads = static_cast<int>(to_integer(key, value));
    } else if (key == "sigma_alpha_formula") {
      if (value == "exact") {
        g.sigma_alpha_formula = AlphaCalibration::Exact;
      } else if (value == "paper") {
        g.sigma_alpha_formula = AlphaCalibration::PaperLiteral;
      } else {
        fail(ErrorKind::InvalidInput, "sigma_alpha_formula must be exact or paper");
      }
    } else {
      fail(ErrorKind::InvalidInput, "unknown config key '" + key + "'");
    }
  }
  g.validate();
  return g;
}

ExperimentGrid load_grid_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot read config " + path);
  return parse_grid_config(in);
}

Eigen::Index samples_for(int d, double gamma) {
  return static_cast<Eigen::Index>(std::llround(static_cast<double>(d) / gamma));
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t d_index,
                             std::size_t gamma_index, int replicate) {
  std::uint64_t h = splitmix64(d_index);
  h = splitmix64(h ^ gamma_index);
  h = splitmix64(h ^ static_cast<std::uint64_t>(replicate));
  return master_seed ^ h;
}

const std::vector<std::string>& grid_row_columns() {
  static const std::vector<std::string> cols{
      "d",           "n",           "gamma",        "gamma_tilde", "c",
      "replicate",   "seed",        "zeta_true",    "zeta_pop",    "zeta_plugin",
      "zeta_tcorr",  "zeta_rmt",    "tau_pop",      "tau_plugin",  "tau_rmt",
      "theta_true",  "theta_pop",   "theta_plugin", "theta_rmt",   "sigma_alpha",
      "sigma_beta",  "S",           "degenerate_flag", "root_found_rmt", "runtime_ms"};
  return cols;
}

GridRow run_replicate(const ExperimentGrid& grid, std::size_t d_index, std::size_t gamma_index,
                      int replicate, bool timing) {
  const auto start = std::chrono::steady_clock::now();
  GridRow row;
  row.d = grid.d_values.at(d_index);
  row.gamma = grid.gamma_values.at(gamma_index);
  row.n = samples_for(row.d, row.gamma);
  row.gamma_tilde = grid.gamma_tilde;
  row.c = grid.c;
  row.replicate = replicate;
  row.seed = replicate_seed(grid.master_seed, d_index, gamma_index, replicate);
  for (double* f : {&row.zeta_true, &row.zeta_pop, &row.zeta_plugin, &row.zeta_tcorr,
                    &row.zeta_rmt, &row.tau_pop, &row.tau_plugin, &row.tau_rmt, &row.theta_true,
                    &row.theta_pop, &row.theta_plugin, &row.theta_rmt, &row.sigma_alpha,
                    &row.sigma_beta, &row.S}) {
    *f = kNaN;
  }

  Rng rng(row.seed);
  try {
    double sigma_beta2 = grid.sigma_beta_min;
    if (grid.sigma_beta_max > grid.sigma_beta_min) {
      std::uniform_real_distribution<double> u(grid.sigma_beta_min, grid.sigma_beta_max);
      do {
        sigma_beta2 = u(rng);
      } while (sigma_beta2 <= 0.0);
    }
    double zeta_target = grid.zeta_fixed;
    if (grid.zeta_mode == ZetaMode::Uniform) {
      zeta_target = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    const CausalModel model =
        grid.zeta_mode == ZetaMode::FixedTheta
            ? build_model_with_theta(row.d, grid.gamma_tilde, grid.c, grid.theta_fixed,
                                     sigma_beta2, grid.sigma_eps2, rng)
            : build_model(row.d, grid.gamma_tilde, grid.c, zeta_target, sigma_beta2,
                          grid.sigma_eps2, rng, grid.sigma_alpha_formula);
    const ObservationalData data = draw_observations(model, row.n, rng);
    const GroundTruth gt = ground_truth(model);
    row.zeta_true = gt.zeta;
    row.tau_pop = gt.tau_pop;
    row.theta_true = gt.theta_true;
    row.sigma_alpha = model.sigma_alpha2();
    row.sigma_beta = model.sigma_beta2();

    const SampleAnalysis sample(data);
    row.S = sample.noise();
    EstimatorConfig config;
    config.theta_cap = grid.theta_cap;
    const AlignedSpectrum pop = population_form(model);
    const EstimateSet est = estimate_all(sample, grid.include_population ? &pop : nullptr, config);

    row.tau_plugin = est.plugin.tau;
    row.tau_rmt = est.rmt.tau;
    row.theta_plugin = est.plugin.theta;
    row.theta_rmt = est.rmt.theta;
    row.zeta_plugin = est.plugin.zeta;
    row.zeta_tcorr = est.tau_corrected.zeta;
    row.zeta_rmt = est.rmt.zeta;
    row.root_found_rmt = est.rmt.diagnostics.root_found;
    row.degenerate_flag = est.plugin.degenerate || est.rmt.degenerate;
    if (est.population) {
      row.zeta_pop = est.population->zeta;
      row.theta_pop = est.population->theta;
      row.degenerate_flag = row.degenerate_flag || est.population->degenerate;
    }
  } catch (const Error& e) {
    row.error = e.what();
  }
  if (timing) {
    row.runtime_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  }
  return row;
}

std::vector<GridRow> run_grid(const ExperimentGrid& grid, const RunOptions& options) {
  grid.validate();
  struct Task {
    std::size_t di, gi;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t di = 0; di < grid.d_values.size(); ++di) {
    for (std::size_t gi = 0; gi < grid.gamma_values.size(); ++gi) {
      for (int r = 0; r < grid.replicates; ++r) tasks.push_back({di, gi, r});
    }
  }
  std::vector<GridRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      rows[i] = run_replicate(grid, tasks[i].di, tasks[i].gi, tasks[i].rep, options.timing);
    }
  };
  const int nthreads = std::min<int>(resolve_threads(grid, options), static_cast<int>(tasks.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

void write_rows_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  const auto& cols = grid_row_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const GridRow& r : rows) {
    out << r.d << ',' << r.n << ',' << format_double(r.gamma) << ',' << format_double(r.gamma_tilde)
        << ',' << format_double(r.c) << ',' << r.replicate << ',' << r.seed;
    for (double v : {r.zeta_true, r.zeta_pop, r.zeta_plugin, r.zeta_tcorr, r.zeta_rmt, r.tau_pop,
                     r.tau_plugin, r.tau_rmt, r.theta_true, r.theta_pop, r.theta_plugin,
                     r.theta_rmt, r.sigma_alpha, r.sigma_beta, r.S}) {
      out << ',' << format_double(v);
    }
    out << ',' << (r.degenerate_flag ? 1 : 0) << ',' << (r.root_found_rmt ? 1 : 0) << ','
        << format_double(r.runtime_ms) << '\n';
  }
}

void write_errors_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << "d,gamma,replicate,error\n";
  for (const GridRow& r : rows) {
    if (r.error.empty()) continue;
    std::string msg = r.error;
    for (char& ch : msg) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    out << r.d << ',' << format_double(r.gamma) << ',' << r.replicate << ',' << msg << '\n';
  }
}

std::vector<CellSummary> summarize(const std::vector<GridRow>& rows) {
  if (rows.empty()) fail(ErrorKind::InvalidInput, "no rows to summarize");
  std::vector<CellSummary> cells;
  std::vector<std::vector<std::vector<double>>> errors;  // cell -> estimator -> errors
  for (const GridRow& r : rows) {
    std::size_t k = 0;
    while (k < cells.size() && !(cells[k].d == r.d && cells[k].gamma == r.gamma)) ++k;
    if (k == cells.size()) {
      CellSummary c;
      c.d = r.d;
      c.n = r.n;
      c.gamma = r.gamma;
      cells.push_back(c);
      errors.emplace_back(4);
    }
    cells[k].replicates += 1;
    if (!r.error.empty()) cells[k].failures += 1;
    const double est[4] = {r.zeta_pop, r.zeta_plugin, r.zeta_tcorr, r.zeta_rmt};
    for (int e = 0; e < 4; ++e) {
      if (std::isfinite(est[e]) && std::isfinite(r.zeta_true)) {
        errors[k][e].push_back(est[e] - r.zeta_true);
      }
    }
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    update(cells[k].pop, errors[k][0]);
    update(cells[k].plugin, errors[k][1]);
    update(cells[k].tcorr, errors[k][2]);
    update(cells[k].rmt, errors[k][3]);
  }
  return cells;
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << "d,n,gamma,replicates,failures";
  for (const char* name : {"pop", "plugin", "tcorr", "rmt"}) {
    out << ",bias_" << name << ",mae_" << name << ",se_" << name << ",count_" << name;
  }
  out << '\n';
  for (const CellSummary& c : cells) {
    out << c.d << ',' << c.n << ',' << format_double(c.gamma) << ',' << c.replicates << ','
        << c.failures;
    for (const EstimatorSummary* s : {&c.pop, &c.plugin, &c.tcorr, &c.rmt}) {
      out << ',' << format_double(s->bias) << ',' << format_double(s->mae) << ','
          << format_double(s->se) << ',' << s->count;
    }
    out << '\n';
  }
}

}  // namespace confound
