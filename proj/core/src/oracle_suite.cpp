#include <cmath>
#include <string>

#include "confound/errors.hpp"
#include "confound/estimators.hpp"
#include "confound/experiment.hpp"
#include "confound/linalg.hpp"
#include "confound/matrix_io.hpp"
#include "confound/oracles.hpp"

namespace confound {
namespace {

constexpr double kGamma = 0.5;
constexpr double kGammaTilde = 1.2;
constexpr double kC = 1.0 / 3.0;
constexpr double kThetaStar = 1.0;
constexpr double kThetas[] = {0.5, 1.0, 2.0};

OracleCheck check(std::string name, double empirical, double limit, double tol) {
  return {std::move(name), empirical, limit, tol, std::abs(empirical - limit) <= tol};
}

// Eigenvalues of (1/n) X X^T with X = diag(sqrt(lambda)) Z.
std::vector<double> sample_covariance_spectrum(const std::vector<double>& lambda, Eigen::Index n,
                                               Rng& rng) {
  const auto d = static_cast<Eigen::Index>(lambda.size());
  Eigen::MatrixXd x(d, n);
  fill_standard_normal(x, rng);
  for (Eigen::Index i = 0; i < d; ++i) x.row(i) *= std::sqrt(lambda[i]);
  const Eigen::VectorXd v = symmetric_eigenvalues(gram_rows(x, 1.0 / static_cast<double>(n)));
  return {v.begin(), v.end()};
}

}  // namespace

std::vector<OracleCheck> run_oracle_checks(double tolerance, int d, std::uint64_t seed) {
  if (!(tolerance > 0.0)) fail(ErrorKind::InvalidInput, "tolerance must be > 0");
  if (d < 10) fail(ErrorKind::InvalidInput, "oracle checks need d >= 10");
  std::vector<OracleCheck> out;
  Rng rng(seed);
  const Eigen::Index n = samples_for(d, kGamma);

  for (double c : {0.1, kC, 0.9}) {
    const double mass = LimitSpectrum::marchenko_pastur(c).expect([](double) { return 1.0; });
    out.push_back(check("mp_mass c=" + format_double(c), mass, 1.0, 1e-8));
  }
  out.push_back(check("mp_moment c=1/3 theta=0", mp_moment(kC, 0.0, 1), 1.0 / (1.0 - kC), 1e-8));
  {
    const std::vector<double> draw = sample_mp_eigenvalues(d, kC, rng);
    for (int k : {1, 2}) {
      double emp = 0.0;
      for (double l : draw) emp += std::pow(1.0 / (l + 1.0), k);
      out.push_back(check("mp_moment k=" + std::to_string(k) + " theta=1",
                          emp / static_cast<double>(d), mp_moment(kC, 1.0, k), tolerance));
    }
  }

  const CausalModel model = build_model_with_theta(d, kGammaTilde, kC, kThetaStar, 1.0, 1.0, rng);
  const AlignedSpectrum pop = population_form(model);
  const auto nu = LimitSpectrum::marchenko_pastur(kC);
  for (double t : kThetas) {
    out.push_back(check("f_pop theta=" + format_double(t), log_objective(pop, t).derivative,
                        f_pop_limit(t, kThetaStar, nu), tolerance));
  }

  const SampleAnalysis sample(draw_observations(model, n, rng));
  {
    // Limiting sample spectrum from an independent draw.
    Rng proxy_rng(seed ^ 0x5DEECE66DULL);
    const std::vector<double> lambda = sample_mp_eigenvalues(4000, kC, proxy_rng);
    const auto mu = LimitSpectrum::discrete(
        sample_covariance_spectrum(lambda, samples_for(4000, kGamma), proxy_rng));
    for (double t : kThetas) {
      out.push_back(check("f_plugin theta=" + format_double(t),
                          log_objective(sample.plugin_form(), t).derivative,
                          f_plugin_limit(t, kThetaStar, kGamma, kGammaTilde, mu), tolerance));
    }
  }

  {
    Eigen::MatrixXd x(d, n);
    fill_standard_normal(x, rng);
    const Eigen::VectorXd l = symmetric_eigenvalues(gram_rows(x, 1.0 / static_cast<double>(n)));
    const auto mu = LimitSpectrum::marchenko_pastur(kGamma);
    for (double t : kThetas) {
      const auto [first, second] = mixed_trace_limits(t, kGamma, mu);
      const Eigen::ArrayXd r = (l.array() + t).inverse();
      out.push_back(check("mixed_trace_1 theta=" + format_double(t), (r * l.array()).mean(), first,
                          tolerance));
      out.push_back(check("mixed_trace_2 theta=" + format_double(t),
                          (r * r * l.array()).mean(), second, tolerance));
    }
  }
  return out;
}

}  // namespace confound
