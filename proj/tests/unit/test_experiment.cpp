#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "confound/errors.hpp"
#include "confound/experiment.hpp"
#include "confound/matrix_io.hpp"
#include "support.hpp"

using namespace confound;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidInput;
}

ExperimentGrid parse(const std::string& text) {
  std::istringstream in(text);
  return parse_grid_config(in);
}

ExperimentGrid small_grid() {
  return parse("d_values = 40\ngamma_values = 0.5, 0.8\nreplicates = 3\nmaster_seed = 7\n");
}

std::string csv(const std::vector<GridRow>& rows) {
  std::ostringstream out;
  write_rows_csv(out, rows);
  return out.str();
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("confound_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                    "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  std::filesystem::create_directories(dir);
  return dir;
}

GridRow row(double truth, double estimate) {
  GridRow r;
  r.d = 10;
  r.n = 20;
  r.gamma = 0.5;
  r.zeta_true = truth;
  r.zeta_pop = r.zeta_plugin = r.zeta_tcorr = r.zeta_rmt = estimate;
  return r;
}

}  // namespace

TEST(GridConfig, DefaultsAndOverrides) {
  const ExperimentGrid def = parse("");
  EXPECT_EQ(def.d_values, (std::vector<int>{100, 250, 500, 1000}));
  EXPECT_EQ(def.gamma_values.size(), 5u);
  EXPECT_EQ(def.replicates, 25);
  EXPECT_DOUBLE_EQ(def.gamma_tilde, 1.2);

  const ExperimentGrid g = parse(
      "# comment\n d_values = 100, 200 \n gamma_values=0.3\n zeta_mode = fixed(0.25)  # inline\n"
      "master_seed = 0x10\n include_population = false\n sigma_beta_max = 2\n out_path = r.csv\n"
      "sigma_alpha_formula = paper\n theta_cap = 50\n threads = 2\n");
  EXPECT_EQ(g.d_values, (std::vector<int>{100, 200}));
  EXPECT_EQ(g.zeta_mode, ZetaMode::Fixed);
  EXPECT_DOUBLE_EQ(g.zeta_fixed, 0.25);
  EXPECT_EQ(g.master_seed, 16u);
  EXPECT_FALSE(g.include_population);
  EXPECT_EQ(g.out_path, "r.csv");
  EXPECT_EQ(g.sigma_alpha_formula, AlphaCalibration::PaperLiteral);
  EXPECT_EQ(g.threads, 2);
  EXPECT_EQ(parse("zeta_mode = fixed_theta\ntheta_fixed = 2").zeta_mode, ZetaMode::FixedTheta);
}

TEST(GridConfig, Errors) {
  EXPECT_EQ(kind_of([] { parse("colour = red"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("d_values"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("replicates = three"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("replicates = 0"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("gamma_values = 1.0"); }), ErrorKind::InvalidInput);
  // round(1 / 0.9) = 1 = d
  EXPECT_EQ(kind_of([] { parse("d_values = 1\ngamma_values = 0.9"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("zeta_mode = sometimes"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { parse("master_seed = -1"); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { load_grid_config("/nonexistent/grid.cfg"); }), ErrorKind::InvalidInput);
}

TEST(Seeds, MatchIndependentHash) {
  EXPECT_EQ(replicate_seed(0, 0, 0, 0), 2558736989570252433ULL);
  EXPECT_EQ(replicate_seed(7, 1, 2, 3), 15020427595393229492ULL);
  EXPECT_EQ(replicate_seed(0xDEADBEEF, 3, 4, 24), 3951784214015321534ULL);
  EXPECT_NE(replicate_seed(7, 1, 2, 3), replicate_seed(7, 2, 1, 3));
  EXPECT_EQ(samples_for(100, 0.3), 333);
  EXPECT_EQ(samples_for(1000, 0.9), 1111);
}

TEST(RunGrid, DeterministicAcrossRunsAndThreads) {
  const ExperimentGrid g = small_grid();
  const std::string serial = csv(run_grid(g, {1, false}));
  EXPECT_EQ(serial, csv(run_grid(g, {1, false})));
  EXPECT_EQ(serial, csv(run_grid(g, {3, false})));
}

TEST(RunGrid, RowsOrderedAndPopulated) {
  const std::vector<GridRow> rows = run_grid(small_grid());
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const GridRow& r = rows[i];
    EXPECT_EQ(r.replicate, static_cast<int>(i % 3));
    EXPECT_DOUBLE_EQ(r.gamma, i < 3 ? 0.5 : 0.8);
    EXPECT_EQ(r.n, i < 3 ? 80 : 50);
    EXPECT_EQ(r.seed, replicate_seed(7, 0, i / 3, r.replicate));
    EXPECT_TRUE(r.error.empty()) << r.error;
    for (double z : {r.zeta_true, r.zeta_pop, r.zeta_plugin, r.zeta_tcorr, r.zeta_rmt}) {
      EXPECT_GE(z, 0.0);
      EXPECT_LT(z, 1.0);
    }
    EXPECT_NEAR(r.zeta_tcorr, r.tau_rmt * r.theta_plugin / (1.0 + r.tau_rmt * r.theta_plugin), 1e-14);
    EXPECT_EQ(r.runtime_ms, 0.0);
  }
  EXPECT_GT(run_replicate(small_grid(), 0, 0, 0, true).runtime_ms, 0.0);
}

TEST(RunGrid, CsvSchema) {
  const std::string text = csv(run_grid(small_grid()));
  const std::string header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header,
            "d,n,gamma,gamma_tilde,c,replicate,seed,zeta_true,zeta_pop,zeta_plugin,zeta_tcorr,"
            "zeta_rmt,tau_pop,tau_plugin,tau_rmt,theta_true,theta_pop,theta_plugin,theta_rmt,"
            "sigma_alpha,sigma_beta,S,degenerate_flag,root_found_rmt,runtime_ms");
  EXPECT_EQ(grid_row_columns().size(), 25u);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 24) << line;
  }
}

TEST(RunGrid, FailuresAreRecordedInRow) {
  ExperimentGrid g = small_grid();
  g.replicates = 1;
  g.sigma_eps2 = 0.0;
  g.zeta_mode = ZetaMode::Fixed;
  g.zeta_fixed = 0.0;
  g.d_values = {30};
  g.gamma_values = {0.5};
  // Regression energy of order 1e-300 sits below the noise-floor guard.
  g.sigma_beta_min = g.sigma_beta_max = 1e-300;
  const std::vector<GridRow> rows = run_grid(g);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].error.rfind("Degenerate: ", 0), 0u) << rows[0].error;
  EXPECT_TRUE(std::isnan(rows[0].zeta_rmt));
  EXPECT_TRUE(std::isfinite(rows[0].zeta_true));
  std::ostringstream out;
  write_errors_csv(out, rows);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("d,gamma,replicate,error\n30,0.5,0,Degenerate: ", 0), 0u) << text;
  EXPECT_EQ(summarize(rows)[0].failures, 1);
}

TEST(Summarize, SingleRowAndIdenticalRows) {
  const std::vector<CellSummary> one = summarize({row(0.3, 0.5)});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].rmt.bias, 0.5 - 0.3);
  EXPECT_DOUBLE_EQ(one[0].plugin.mae, 0.5 - 0.3);
  EXPECT_EQ(one[0].rmt.se, 0.0);
  EXPECT_EQ(one[0].rmt.count, 1);

  const std::vector<CellSummary> same = summarize({row(0.3, 0.4), row(0.3, 0.4), row(0.3, 0.4)});
  EXPECT_EQ(same[0].replicates, 3);
  EXPECT_EQ(same[0].tcorr.se, 0.0);
  EXPECT_NEAR(same[0].tcorr.bias, 0.1, 1e-15);
}

TEST(Summarize, StatisticsAndMissingValues) {
  GridRow a = row(0.5, 0.7), b = row(0.5, 0.2), c = row(0.5, 0.6);
  c.zeta_rmt = NAN;
  c.error = "Degenerate: test";
  GridRow other = row(0.1, 0.1);
  other.d = 20;
  const std::vector<CellSummary> s = summarize({a, b, c, other});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].failures, 1);
  EXPECT_EQ(s[0].rmt.count, 2);
  EXPECT_EQ(s[0].plugin.count, 3);
  // errors 0.2, -0.3, 0.1
  EXPECT_NEAR(s[0].plugin.bias, 0.0, 1e-15);
  EXPECT_NEAR(s[0].plugin.mae, 0.2, 1e-15);
  EXPECT_NEAR(s[0].plugin.se, std::sqrt((0.04 + 0.09 + 0.01) / 2.0 / 3.0), 1e-15);
  EXPECT_EQ(s[1].d, 20);
  EXPECT_EQ(kind_of([] { summarize({}); }), ErrorKind::InvalidInput);

  std::ostringstream out;
  write_summary_csv(out, s);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "d,n,gamma,replicates,failures,bias_pop,mae_pop,se_pop,count_pop,bias_plugin,"
            "mae_plugin,se_plugin,count_plugin,bias_tcorr,mae_tcorr,se_tcorr,count_tcorr,"
            "bias_rmt,mae_rmt,se_rmt,count_rmt");
}

TEST(MatrixIo, FormatRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(NAN), "nan");
}

TEST(MatrixIo, CsvRoundTripWithHeader) {
  Rng rng(70);
  const Eigen::MatrixXd m = support::gaussian(3, 5, rng);
  std::stringstream io;
  write_matrix_csv(io, m, "d=3 n=5");
  std::string header;
  const Eigen::MatrixXd back = read_matrix_csv(io, &header);
  EXPECT_EQ(back, m);
  EXPECT_EQ(header, "d=3 n=5");
}

TEST(MatrixIo, CsvErrors) {
  std::istringstream ragged("1,2\n3\n");
  EXPECT_EQ(kind_of([&] { read_matrix_csv(ragged); }), ErrorKind::InvalidInput);
  std::istringstream junk("1,x\n");
  EXPECT_EQ(kind_of([&] { read_matrix_csv(junk); }), ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { read_matrix_file("/nonexistent/m.csv"); }), ErrorKind::InvalidInput);
}

TEST(MatrixIo, DatasetAndModelRoundTrip) {
  const auto dir = temp_dir();
  Rng rng(71);
  const CausalModel m = build_model(6, 1.5, 1.0 / 3.0, 0.4, 2.0, 0.5, rng);
  const ObservationalData data = draw_observations(m, 15, rng);
  const std::string x = (dir / "x.csv").string(), y = (dir / "y.csv").string();
  write_dataset(x, y, data);
  const ObservationalData back = read_dataset(x, y);
  EXPECT_EQ(back.x(), data.x());
  EXPECT_EQ(back.y(), data.y());

  const std::string prefix = (dir / "model").string();
  write_model(prefix, m);
  const CausalModel mb = read_model(prefix);
  EXPECT_EQ(mb.mixing(), m.mixing());
  EXPECT_EQ(mb.alpha(), m.alpha());
  EXPECT_EQ(mb.beta(), m.beta());
  EXPECT_EQ(mb.sigma_alpha2(), m.sigma_alpha2());
  EXPECT_NEAR(ground_truth(mb).zeta, ground_truth(m).zeta, 1e-10);

  // Header disagrees with the matrix shape.
  {
    std::ofstream bad(x);
    bad << "# d=2 n=15\n";
    write_matrix_csv(bad, data.x());
  }
  EXPECT_EQ(kind_of([&] { read_dataset(x, y); }), ErrorKind::InvalidInput);
  std::filesystem::remove_all(dir);
}
