#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confound/errors.hpp"
#include "confound/estimators.hpp"
#include "confound/linalg.hpp"
#include "confound/model.hpp"
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

// Sigma_hat = diag(2, 0.5) with n = 4 and a residual direction orthogonal to both rows.
Eigen::MatrixXd two_by_four() {
  Eigen::MatrixXd x(2, 4);
  x.row(0) = std::sqrt(2.0) * Eigen::RowVector4d(1, 1, 1, 1);
  x.row(1) = std::sqrt(0.5) * Eigen::RowVector4d(1, -1, 1, -1);
  return x;
}

Eigen::MatrixXd mp_features(int d, Eigen::Index n, double c, Rng& rng) {
  const std::vector<double> l = sample_mp_eigenvalues(d, c, rng);
  Eigen::MatrixXd x = support::gaussian(d, n, rng);
  for (int i = 0; i < d; ++i) x.row(i) *= std::sqrt(l[static_cast<std::size_t>(i)]);
  return x;
}

struct Fixture {
  CausalModel model;
  ObservationalData data;
  GroundTruth truth;
};

Fixture confounded(int d, double gamma, double theta_star, std::uint64_t seed) {
  Rng rng(seed);
  CausalModel m = build_model_with_theta(d, 1.2, 1.0 / 3.0, theta_star, 1.0, 1.0, rng);
  ObservationalData data = draw_observations(m, std::llround(d / gamma), rng);
  GroundTruth gt = ground_truth(m);
  return {std::move(m), std::move(data), std::move(gt)};
}

}  // namespace

TEST(Tau, DiagonalSampleCovariance) {
  const Eigen::MatrixXd x = two_by_four();
  EXPECT_NEAR(tau_plugin(x), 1.25, 1e-14);
  EXPECT_NEAR(tau_rmt(x), 0.625, 1e-14);
}

TEST(Tau, RankDeficientFeatures) {
  Eigen::MatrixXd x(2, 4);
  x.row(0) << 1, 2, 3, 4;
  x.row(1) = 2.0 * x.row(0);
  EXPECT_EQ(kind_of([&] { tau_plugin(x); }), ErrorKind::RankDeficient);
  EXPECT_EQ(kind_of([&] { tau_plugin(Eigen::MatrixXd::Ones(3, 3)); }), ErrorKind::InvalidInput);
}

TEST(Tau, PluginBiasUnderIdentityCovariance) {
  Rng rng(30);
  for (double gamma : {0.25, 0.5, 0.75}) {
    const int d = 1000;
    const Eigen::MatrixXd x = support::gaussian(d, std::llround(d / gamma), rng);
    EXPECT_NEAR(tau_plugin(x) * (1.0 - gamma), 1.0, 0.05) << gamma;
    EXPECT_NEAR(tau_rmt(x), 1.0, 0.05) << gamma;
  }
}

TEST(Tau, CorrectedTraceMatchesModel) {
  Rng rng(29);
  const CausalModel m = build_model_with_theta(500, 1.2, 1.0 / 3.0, 1.0, 1.0, 1.0, rng);
  const ObservationalData data = draw_observations(m, 5000, rng);
  EXPECT_NEAR(tau_rmt(data.x()) / ground_truth(m).tau_pop, 1.0, 0.05);
}

TEST(NoiseEstimate, ExactAndOrthogonalResidual) {
  const Eigen::MatrixXd x = two_by_four();
  const Eigen::VectorXd fit = x.transpose() * Eigen::Vector2d(0.3, -1.0);
  EXPECT_NEAR(noise_estimate_S(x, fit), 0.0, 1e-14);
  const Eigen::Vector4d e(1, 1, -1, -1);
  // |e|^2 / ((1 - gamma) n d) = 4 / (0.5 * 4 * 2)
  EXPECT_NEAR(noise_estimate_S(x, fit + e), 1.0, 1e-14);
}

TEST(NoiseEstimate, TracksStatisticalNoise) {
  const Fixture f = confounded(500, 0.5, 1.0, 31);
  const SampleAnalysis s(f.data);
  EXPECT_NEAR(s.noise() * 500.0 / f.truth.sigma_stat2, 1.0, 0.1);
}

TEST(SampleAnalysis, RejectsBadShapes) {
  EXPECT_EQ(kind_of([] { SampleAnalysis(Eigen::MatrixXd::Ones(3, 3), Eigen::VectorXd::Ones(3)); }),
            ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([] { SampleAnalysis(Eigen::MatrixXd::Ones(2, 4), Eigen::VectorXd::Ones(3)); }),
            ErrorKind::InvalidInput);
}

TEST(SampleAnalysis, ColumnPermutationIsBitExact) {
  const Fixture f = confounded(60, 0.5, 1.0, 32);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(f.data.samples()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 17, perm.end());
  Eigen::MatrixXd xp(f.data.dim(), f.data.samples());
  Eigen::VectorXd yp(f.data.samples());
  for (std::size_t j = 0; j < perm.size(); ++j) {
    xp.col(static_cast<Eigen::Index>(j)) = f.data.x().col(perm[j]);
    yp(static_cast<Eigen::Index>(j)) = f.data.y()(perm[j]);
  }
  const EstimateSet a = estimate_all(f.data.x(), f.data.y());
  const EstimateSet b = estimate_all(xp, yp);
  EXPECT_EQ(a.plugin.theta, b.plugin.theta);
  EXPECT_EQ(a.rmt.theta, b.rmt.theta);
  EXPECT_EQ(a.tau_corrected.zeta, b.tau_corrected.zeta);
  EXPECT_EQ(SampleAnalysis(f.data).noise(), SampleAnalysis(xp, yp).noise());
}

TEST(Quadform, SmallThetaApproachesOne) {
  const Fixture f = confounded(1000, 0.5, 1.0, 33);
  const SampleAnalysis s(f.data);
  EXPECT_NEAR(quadform_estimate(s, 1e-3), 1.0, 0.05);
  EXPECT_GT(quadform_estimate(s, 1e-3), quadform_estimate(s, 1.0));
}

TEST(Quadform, BuildingBlocksMatchPopulation) {
  const Fixture f = confounded(1000, 0.5, 1.0, 34);
  const SampleAnalysis s(f.data);
  const Eigen::MatrixXd sigma = f.model.covariance();
  for (double theta : {0.5, 1.0, 2.0}) {
    const support::PopulationTargets t = support::population_targets(sigma, f.truth.beta_stat, theta);
    const RmtTerms r = rmt_terms(s, theta);
    EXPECT_NEAR(r.quadform, t.q1, 0.05) << theta;
    EXPECT_NEAR(r.quadform_derivative, t.q2, 0.05) << theta;
    EXPECT_NEAR(r.stieltjes, t.m, 0.05) << theta;
    EXPECT_NEAR(stieltjes_estimate(f.data.x(), theta), r.stieltjes, 1e-12) << theta;
  }
}

TEST(Quadform, DerivativeMatchesFiniteDifference) {
  const Fixture f = confounded(500, 0.5, 1.0, 35);
  const SampleAnalysis s(f.data);
  const double h = 1e-4;
  for (double theta : {0.5, 1.0, 2.0}) {
    const double fd = (quadform_estimate(s, theta - h) - quadform_estimate(s, theta + h)) / (2 * h);
    const double q2 = quadform_derivative_estimate(s, theta);
    EXPECT_GT(q2, 0.0);
    EXPECT_NEAR(fd / q2, 1.0, 1e-3) << theta;
  }
}

TEST(Quadform, InvariantToResponseScale) {
  const Fixture f = confounded(200, 0.5, 1.0, 36);
  const SampleAnalysis a(f.data.x(), f.data.y());
  const SampleAnalysis b(f.data.x(), 3.0 * f.data.y());
  EXPECT_NEAR(quadform_estimate(a, 1.0), quadform_estimate(b, 1.0), 1e-12);
  EXPECT_NEAR(h_rmt(a, 1.0), h_rmt(b, 1.0), 1e-12);
}

TEST(Stieltjes, IdentityCovariance) {
  Rng rng(37);
  const Eigen::MatrixXd x = support::gaussian(500, 2000, rng);
  EXPECT_NEAR(stieltjes_estimate(x, 1.0), 0.5, 0.03);
  double prev = INFINITY;
  for (double theta : {0.5, 1.0, 2.0, 4.0}) {
    const double m = stieltjes_estimate(x, theta);
    EXPECT_GT(m, 0.0);
    EXPECT_LT(m, prev);
    prev = m;
  }
}

TEST(Stieltjes, MarchenkoPasturCovariance) {
  Rng rng(36);
  const Eigen::MatrixXd x = mp_features(1000, 2000, 1.0 / 3.0, rng);
  // E 1/(l + 1) under MP(1/3)
  EXPECT_NEAR(stieltjes_estimate(x, 1.0), 0.541381265149109, 0.03);
}

TEST(LogDet, IdentityCovarianceAveraged) {
  Rng rng(38);
  const Eigen::MatrixXd x = support::gaussian(800, 1600, rng);
  EXPECT_NEAR(logdet_estimate_g1(x, 1.0, rng, 20), std::log(2.0), 0.05);
}

TEST(LogDet, MarchenkoPasturCovariance) {
  Rng rng(39);
  const Eigen::MatrixXd x = mp_features(800, 1600, 1.0 / 3.0, rng);
  // E log(l + 1/2) under MP(1/3)
  EXPECT_NEAR(logdet_estimate_g1(x, 0.5, rng), 0.331749957264, 0.05);
}

TEST(LogDet, SpreadShrinksWithDimension) {
  Rng rng(40);
  const auto spread = [&](int d) {
    const Eigen::MatrixXd x = support::gaussian(d, 2 * d, rng);
    std::vector<double> v;
    for (int i = 0; i < 8; ++i) v.push_back(logdet_estimate_g1(x, 1.0, rng));
    const double mu = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double e : v) ss += (e - mu) * (e - mu);
    return std::sqrt(ss / (v.size() - 1));
  };
  EXPECT_LT(spread(800), spread(200));
}

TEST(HRmt, RootNearTruthAtLargeDimension) {
  const Fixture f = confounded(2000, 0.5, 1.0, 41);
  const SampleAnalysis s(f.data);
  EXPECT_LT(std::abs(h_rmt(s, 1.0)), 0.02);
  EXPECT_LT(h_rmt(s, 0.25), 0.0);
  EXPECT_GT(h_rmt(s, 4.0), 0.0);
  const AlignedSpectrum pop = population_form(f.model);
  for (double theta : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(h_rmt(s, theta), log_objective(pop, theta).derivative, 0.05) << theta;
  }
}

TEST(HRmt, UnconfoundedDataHasPositiveObjective) {
  const Fixture f = confounded(1000, 0.5, 0.0, 42);
  const SampleAnalysis s(f.data);
  for (double theta = 0.01; theta <= 100.0; theta *= 1.5) {
    EXPECT_GT(h_rmt(s, theta), 0.0) << theta;
  }
}

TEST(HRmt, PureNoiseIsDegenerate) {
  Rng rng(43);
  const Eigen::MatrixXd x = support::gaussian(50, 100, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  EXPECT_EQ(kind_of([&] { h_rmt(x, y, 1.0); }), ErrorKind::Degenerate);
  EXPECT_EQ(kind_of([&] { h_rmt(x, support::gaussian(100, 1, rng), 0.0); }),
            ErrorKind::InvalidInput);
}

TEST(SolveTheta, DeterministicEquivalentPopulation) {
  Rng rng(44);
  const std::vector<double> l = sample_mp_eigenvalues(2000, 1.0 / 3.0, rng);
  AlignedSpectrum form;
  form.eigenvalues = Eigen::Map<const Eigen::VectorXd>(l.data(), 2000);
  std::sort(form.eigenvalues.data(), form.eigenvalues.data() + 2000);
  // Expected energy of beta + M^{+T} alpha along each eigenvector.
  form.energy = (1.0 + 2.0 * form.eigenvalues.array().inverse()).matrix();
  ThetaObjective obj;
  obj.kind = ObjectiveKind::PopDerivative;
  const ThetaSolution sol = solve_theta(obj, form);
  EXPECT_TRUE(sol.diagnostics.root_found);
  EXPECT_NEAR(sol.theta, 2.0, 1e-6);
  EXPECT_GE(sol.theta, sol.diagnostics.bracket_lo);
  EXPECT_LE(sol.theta, sol.diagnostics.bracket_hi);
}

TEST(SolveTheta, NoConfoundingGivesZero) {
  Rng rng(45);
  const std::vector<double> l = sample_mp_eigenvalues(300, 1.0 / 3.0, rng);
  AlignedSpectrum form{Eigen::Map<const Eigen::VectorXd>(l.data(), 300),
                       Eigen::VectorXd::Ones(300)};
  ThetaObjective obj;
  obj.kind = ObjectiveKind::PopDerivative;
  const ThetaSolution sol = solve_theta(obj, form);
  EXPECT_FALSE(sol.diagnostics.root_found);
  EXPECT_EQ(sol.theta, 0.0);
}

TEST(SolveTheta, IdentityCovarianceIsDegenerate) {
  Rng rng(46);
  const Eigen::VectorXd b = support::gaussian(50, 1, rng);
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(50, 50);
  for (double theta : {0.01, 1.0, 50.0}) {
    EXPECT_LT(std::abs(logprob_pop(sigma, b, theta).derivative), 1e-12);
  }
  Rng drng(47);
  const ObservationalData data(support::gaussian(50, 100, drng), support::gaussian(100, 1, drng));
  const SampleAnalysis s(data);
  const AlignedSpectrum pop = population_form(sigma, b);
  const EstimateSet est = estimate_all(s, &pop);
  ASSERT_TRUE(est.population.has_value());
  EXPECT_TRUE(est.population->degenerate);
}

TEST(SolveTheta, ObjectiveValidation) {
  ThetaObjective obj;
  obj.search_cap = -1.0;
  EXPECT_EQ(kind_of([&] { obj.validate(); }), ErrorKind::InvalidInput);
  obj = {};
  obj.scan_points = 1;
  EXPECT_EQ(kind_of([&] { obj.validate(); }), ErrorKind::InvalidInput);
  obj = {};
  obj.kind = ObjectiveKind::PopDerivative;
  const Fixture f = confounded(40, 0.5, 1.0, 48);
  EXPECT_EQ(kind_of([&] { solve_theta(obj, SampleAnalysis(f.data)); }), ErrorKind::InvalidInput);
}

TEST(FindTheta, PrefersAscendingCrossing) {
  ThetaObjective obj;
  obj.search_cap = 10.0;
  // Descending crossing at 1, ascending at 4.
  const ThetaSolution sol = find_theta(obj, [](double t) { return (t - 1.0) * (t - 4.0) * -1.0; });
  EXPECT_TRUE(sol.diagnostics.root_found);
  EXPECT_NEAR(sol.theta, 1.0, 1e-8);
  const ThetaSolution up = find_theta(obj, [](double t) { return (t - 1.0) * (t - 4.0); });
  EXPECT_NEAR(up.theta, 4.0, 1e-8);
}

TEST(FindTheta, ErrorsCarryContext) {
  ThetaObjective obj;
  try {
    find_theta(obj, [](double t) -> double {
      if (t > 1.0) fail(ErrorKind::Degenerate, "boom");
      return 1.0;
    });
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    EXPECT_NE(std::string(e.what()).find("theta = "), std::string::npos);
    EXPECT_EQ(std::string(e.what()).find("Degenerate: Degenerate"), std::string::npos);
  }
}

TEST(LogObjective, DerivativeMatchesFiniteDifference) {
  const Fixture f = confounded(50, 0.5, 1.0, 49);
  const Eigen::MatrixXd sigma = f.model.covariance();
  const SampleAnalysis s(f.data);
  const double h = 1e-5, theta = 1.0;
  const double fd = (logprob_pop(sigma, f.truth.beta_stat, theta + h).value -
                     logprob_pop(sigma, f.truth.beta_stat, theta - h).value) /
                    (2 * h);
  const double an = logprob_pop(sigma, f.truth.beta_stat, theta).derivative;
  EXPECT_NEAR(fd / an, 1.0, 1e-6);
  const double fp = (logprob_plugin(s, theta + h).value - logprob_plugin(s, theta - h).value) / (2 * h);
  EXPECT_NEAR(fp / logprob_plugin(s, theta).derivative, 1.0, 1e-6);
}

TEST(LogObjective, ZeroThetaHasUnitQuadform) {
  const Fixture f = confounded(50, 0.5, 1.0, 55);
  const Eigen::MatrixXd sigma = f.model.covariance();
  const double logdet = symmetric_eigenvalues(sigma).array().log().mean();
  EXPECT_NEAR(logprob_pop(sigma, f.truth.beta_stat, 0.0).value, logdet, 1e-12);
  EXPECT_EQ(kind_of([&] { logprob_pop(sigma, Eigen::VectorXd::Zero(50), 1.0); }),
            ErrorKind::Degenerate);
}

TEST(LogObjective, PopulationFormsAgree) {
  const Fixture f = confounded(100, 0.5, 1.0, 50);
  const AlignedSpectrum a = population_form(f.model);
  for (double theta : {0.5, 2.0}) {
    const ObjectiveValue u = log_objective(a, theta);
    const ObjectiveValue v = logprob_pop(f.model.covariance(), f.truth.beta_stat, theta);
    EXPECT_NEAR(u.value, v.value, 1e-10);
    EXPECT_NEAR(u.derivative, v.derivative, 1e-10);
  }
}

TEST(PluginEstimator, AgreesWithPopulationWhenSamplesAbound) {
  const Fixture f = confounded(50, 0.002, 1.0, 51);
  const SampleAnalysis s(f.data);
  const AlignedSpectrum pop = population_form(f.model);
  ThetaObjective obj;
  obj.kind = ObjectiveKind::PluginDerivative;
  const double plugin = solve_theta(obj, s).theta;
  obj.kind = ObjectiveKind::PopDerivative;
  const double population = solve_theta(obj, pop).theta;
  ASSERT_GT(population, 0.0);
  EXPECT_NEAR(plugin / population, 1.0, 0.1);
}

TEST(EstimateAll, UnconfoundedDataGivesSmallStrength) {
  const Fixture f = confounded(1000, 0.5, 0.0, 52);
  const SampleAnalysis s(f.data);
  const AlignedSpectrum pop = population_form(f.model);
  const EstimateSet e = estimate_all(s, &pop);
  EXPECT_LT(e.rmt.zeta, 0.1);
  EXPECT_LT(e.plugin.zeta, 0.1);
  EXPECT_LT(e.tau_corrected.zeta, 0.1);
  ASSERT_TRUE(e.population.has_value());
  EXPECT_LT(e.population->zeta, 0.1);
  EXPECT_FALSE(estimate_all(f.data.x(), f.data.y()).population.has_value());
}

TEST(EstimateAll, NoRootMeansZeroStrength) {
  const Fixture f = confounded(300, 0.5, 0.0, 56);
  const EstimateSet e = estimate_all(f.data.x(), f.data.y());
  EXPECT_FALSE(e.rmt.diagnostics.root_found);
  EXPECT_EQ(e.rmt.theta, 0.0);
  EXPECT_EQ(e.rmt.zeta, 0.0);
}

TEST(EstimateAll, RmtCloserThanPluginNearUnitRatio) {
  int closer = 0;
  for (int r = 0; r < 25; ++r) {
    Rng rng(1000 + static_cast<std::uint64_t>(r));
    const CausalModel m = build_model(1000, 1.2, 1.0 / 3.0, 0.5, 1.0, 1.0, rng);
    const ObservationalData data = draw_observations(m, std::llround(1000 / 0.9), rng);
    const double truth = ground_truth(m).zeta;
    const EstimateSet e = estimate_all(data.x(), data.y());
    if (std::abs(e.rmt.zeta - truth) < std::abs(e.plugin.zeta - truth)) ++closer;
  }
  EXPECT_GE(closer, 20);
}

TEST(EstimateAll, StrengthIdentities) {
  const Fixture f = confounded(200, 0.5, 1.0, 53);
  const SampleAnalysis s(f.data);
  const EstimateSet e = estimate_all(s, nullptr);
  EXPECT_EQ(e.plugin.theta, e.tau_corrected.theta);
  EXPECT_NEAR(e.tau_corrected.tau, (1.0 - s.gamma()) * e.plugin.tau, 1e-14);
  EXPECT_NEAR(e.tau_corrected.zeta, confounding_strength(e.tau_corrected.tau, e.plugin.theta), 1e-14);
  EXPECT_NEAR(e.rmt.zeta, confounding_strength(e.rmt.tau, e.rmt.theta), 1e-15);
  EXPECT_EQ(e.rmt.method, Method::Rmt);
  EXPECT_EQ(to_string(Method::TauCorrected), "tau_corrected");

  double prev = -1.0;
  for (double t : {0.0, 0.1, 1.0, 10.0, 1e3}) {
    const double z = confounding_strength(1.5, t);
    EXPECT_GT(z, prev);
    EXPECT_LT(z, 1.0);
    prev = z;
  }
}

TEST(QuadraticConcentration, StandardNormalNearTrace) {
  Rng rng(54);
  const int d = 500;
  const Eigen::MatrixXd g = support::gaussian(d, d, rng);
  const Eigen::MatrixXd sym = gram_rows(g, 1.0 / d);
  const Eigen::MatrixXd a = sym / symmetric_eigenvalues(sym).maxCoeff();
  int inside = 0;
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd u = support::gaussian(d, 1, rng);
    if (std::abs(u.dot(a * u) - a.trace()) / d < 5.0 / std::sqrt(d)) ++inside;
  }
  EXPECT_GE(inside, 190);
}

TEST(Dispersion, VanishesOnlyForFlatSpectra) {
  EXPECT_EQ(resolvent_dispersion(Eigen::VectorXd::Constant(10, 2.0), 1.0), 0.0);
  EXPECT_GT(resolvent_dispersion(Eigen::Vector3d(0.5, 1.0, 2.0), 1.0), 1e-3);
}
