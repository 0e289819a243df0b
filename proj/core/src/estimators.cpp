#include "confound/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "confound/errors.hpp"
#include "confound/linalg.hpp"
#include "confound/roots.hpp"

namespace confound {
namespace {

void require_theta(double theta, bool allow_zero) {
  const bool ok = std::isfinite(theta) && (allow_zero ? theta >= 0.0 : theta > 0.0);
  if (!ok) {
    fail(ErrorKind::InvalidInput,
         std::string("theta must be ") + (allow_zero ? ">= 0" : "> 0") + ", got " +
             std::to_string(theta));
  }
}

// Lexicographic order on (column of X, entry of Y).
std::vector<Eigen::Index> canonical_order(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.cols()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (x(r, a) != x(r, b)) return x(r, a) < x(r, b);
    }
    return y(a) < y(b);
  });
  return idx;
}

struct Candidate {
  double x;
  double fx;
  double lo;
  double hi;
  bool ascending;
};

double spectrum_mean(const Eigen::VectorXd& v, auto&& fn) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += fn(v(i));
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Population: return "population";
    case Method::Plugin: return "plugin";
    case Method::TauCorrected: return "tau_corrected";
    case Method::Rmt: return "rmt";
  }
  return "unknown";
}

double confounding_strength(double tau, double theta) {
  const double t = tau * theta;
  return t / (1.0 + t);
}

void ThetaObjective::validate() const {
  if (!(search_cap > 0.0) || !std::isfinite(search_cap)) {
    fail(ErrorKind::InvalidInput, "search_cap must be > 0");
  }
  if (!(tolerance > 0.0)) fail(ErrorKind::InvalidInput, "tolerance must be > 0");
  if (!(scan_min > 0.0 && scan_min < search_cap)) {
    fail(ErrorKind::InvalidInput, "scan_min must lie in (0, search_cap)");
  }
  if (scan_points < 2) fail(ErrorKind::InvalidInput, "scan_points must be >= 2");
}

AlignedSpectrum population_form(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta_stat) {
  if (sigma.rows() != beta_stat.size()) {
    fail(ErrorKind::InvalidInput, "Sigma and beta_stat dimensions differ");
  }
  const EigenSystem eig = symmetric_eigen(sigma);
  if (!(eig.values(0) > 0.0)) fail(ErrorKind::InvalidInput, "Sigma must be positive definite");
  return {eig.values, (eig.vectors.transpose() * beta_stat).array().square().matrix()};
}

AlignedSpectrum population_form(const CausalModel& model) {
  const GroundTruth gt = ground_truth(model);
  const MixingFactors& f = model.factors();
  return {f.eigenvalues, (f.left.transpose() * gt.beta_stat).array().square().matrix()};
}

SampleAnalysis::SampleAnalysis(const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
    : d_(x.rows()),
      n_(x.cols()),
      gamma_(0.0),
      cov_({}, 1),
      ker_({}, 1),
      noise_(0.0),
      full_rank_(false) {
  if (x.cols() != y.size()) fail(ErrorKind::InvalidInput, "X columns must match Y length");
  if (d_ < 1 || n_ <= d_) fail(ErrorKind::InvalidInput, "need 1 <= d < n");
  if (!all_finite(x) || !y.allFinite()) fail(ErrorKind::InvalidInput, "non-finite input");
  gamma_ = static_cast<double>(d_) / static_cast<double>(n_);

  const std::vector<Eigen::Index> order = canonical_order(x, y);
  Eigen::MatrixXd xs(d_, n_);
  Eigen::VectorXd ys(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    xs.col(j) = x.col(order[static_cast<std::size_t>(j)]);
    ys(j) = y(order[static_cast<std::size_t>(j)]);
  }

  const double inv_n = 1.0 / static_cast<double>(n_);
  const EigenSystem eig = symmetric_eigen(gram_rows(xs, inv_n));
  const double tol = rank_tolerance(d_, n_, eig.values.maxCoeff());
  cov_ = Spectrum(std::vector<double>(eig.values.begin(), eig.values.end()),
                  static_cast<std::size_t>(d_), tol);
  ker_ = cov_.embedded(static_cast<std::size_t>(n_));
  full_rank_ = eig.values(0) > tol;

  const Eigen::VectorXd b = inv_n * (xs * ys);
  Eigen::VectorXd coords = eig.vectors.transpose() * b;
  for (Eigen::Index i = 0; i < d_; ++i) {
    coords(i) = eig.values(i) > tol ? coords(i) / eig.values(i) : 0.0;
  }
  const auto values = cov_.eigenvalues();
  form_.eigenvalues = Eigen::Map<const Eigen::VectorXd>(values.data(), d_);
  form_.energy = coords.array().square().matrix();
  beta_hat_ = eig.vectors * coords;

  const double residual = (ys - xs.transpose() * beta_hat_).squaredNorm();
  noise_ = residual / ((1.0 - gamma_) * static_cast<double>(n_) * static_cast<double>(d_));
}

double SampleAnalysis::tau_plugin() const {
  if (!full_rank_) fail(ErrorKind::RankDeficient, "sample covariance is numerically singular");
  return spectrum_mean(form_.eigenvalues, [](double l) { return 1.0 / l; });
}

double tau_plugin(const Eigen::MatrixXd& x) {
  if (x.cols() <= x.rows()) fail(ErrorKind::InvalidInput, "need d < n");
  const Spectrum spec = spectrum_of_gram(x, 1.0 / static_cast<double>(x.cols()), GramSide::Covariance);
  if (spec.zero_count() > 0) {
    fail(ErrorKind::RankDeficient, "sample covariance is numerically singular");
  }
  return stieltjes(spec, {0.0, 1});
}

double tau_rmt(const Eigen::MatrixXd& x) {
  const double gamma = static_cast<double>(x.rows()) / static_cast<double>(x.cols());
  return (1.0 - gamma) * tau_plugin(x);
}

double noise_estimate_S(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return SampleAnalysis(x, y).noise();
}

RmtTerms rmt_terms(const SampleAnalysis& sample, double theta) {
  require_theta(theta, false);
  const double d = static_cast<double>(sample.dim());
  const double gamma = sample.gamma();
  const double s = sample.noise();
  const AlignedSpectrum& form = sample.plugin_form();

  const double denom = form.energy.sum() / d - s * gamma * sample.tau_plugin();
  if (!(denom >= 1e-12)) {
    fail(ErrorKind::Degenerate, "regression energy is indistinguishable from the noise floor");
  }

  RmtTerms t;
  t.eta = solve_eta(sample.kernel_spectrum(), theta);
  t.eta_prime = eta_derivative(sample.kernel_spectrum(), theta, t.eta);

  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < form.dim(); ++i) {
    const double l = form.eigenvalues(i);
    const double r = 1.0 / (l - t.eta);
    s1 += form.energy(i) * l * r;
    s2 += form.energy(i) * l * r * r;
  }
  const double eta = t.eta;
  t.quadform = (s1 / d - s / theta - s * (1.0 - gamma) / eta) / denom;
  t.quadform_derivative = (t.eta_prime * s2 / d - s / (theta * theta) +
                           s * t.eta_prime * (1.0 - gamma) / (eta * eta)) /
                          denom;
  t.stieltjes = -(eta / theta - gamma + 1.0) / (gamma * theta);
  if (t.quadform == 0.0) fail(ErrorKind::Degenerate, "quadform estimate vanished");
  t.h = (t.quadform * t.stieltjes - t.quadform_derivative) / t.quadform;
  return t;
}

double quadform_estimate(const SampleAnalysis& sample, double theta) {
  return rmt_terms(sample, theta).quadform;
}
double quadform_derivative_estimate(const SampleAnalysis& sample, double theta) {
  return rmt_terms(sample, theta).quadform_derivative;
}
double stieltjes_estimate(const SampleAnalysis& sample, double theta) {
  require_theta(theta, false);
  const double eta = solve_eta(sample.kernel_spectrum(), theta);
  const double gamma = sample.gamma();
  return -(eta / theta - gamma + 1.0) / (gamma * theta);
}
double h_rmt(const SampleAnalysis& sample, double theta) { return rmt_terms(sample, theta).h; }

double quadform_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double theta) {
  return quadform_estimate(SampleAnalysis(x, y), theta);
}
double quadform_derivative_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    double theta) {
  return quadform_derivative_estimate(SampleAnalysis(x, y), theta);
}
double stieltjes_estimate(const Eigen::MatrixXd& x, double theta) {
  require_theta(theta, false);
  if (x.cols() <= x.rows()) fail(ErrorKind::InvalidInput, "need d < n");
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  const Spectrum ker = spectrum_of_gram(x, inv_n, GramSide::Covariance)
                           .embedded(static_cast<std::size_t>(x.cols()));
  const double gamma = static_cast<double>(x.rows()) * inv_n;
  const double eta = solve_eta(ker, theta);
  return -(eta / theta - gamma + 1.0) / (gamma * theta);
}
double h_rmt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double theta) {
  return h_rmt(SampleAnalysis(x, y), theta);
}

double logdet_estimate_g1(const Eigen::MatrixXd& x, double theta, Rng& rng, int draws) {
  require_theta(theta, false);
  if (draws < 1) fail(ErrorKind::InvalidInput, "draws must be >= 1");
  const Eigen::Index d = x.rows(), n = x.cols();
  if (d < 1 || n <= d) fail(ErrorKind::InvalidInput, "need 1 <= d < n");
  const double gamma = static_cast<double>(d) / static_cast<double>(n);
  const double root = std::sqrt(theta);

  double logdet = 0.0;
  Eigen::MatrixXd w(d, n);
  for (int k = 0; k < draws; ++k) {
    fill_standard_normal(w, rng);
    w = x + root * w;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram_rows(w, 1.0 / (static_cast<double>(n) * theta)));
    if (llt.info() != Eigen::Success) {
      fail(ErrorKind::RankDeficient, "perturbed Gram matrix is not positive definite");
    }
    logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum() / static_cast<double>(d);
  }
  return std::log(theta) + logdet / draws + 1.0 + (1.0 - gamma) / gamma * std::log1p(-gamma);
}

ObjectiveValue log_objective(const AlignedSpectrum& form, double theta) {
  require_theta(theta, true);
  if (form.dim() == 0 || form.energy.size() != form.dim()) {
    fail(ErrorKind::InvalidInput, "aligned spectrum is empty or inconsistent");
  }
  const double total = form.energy.sum();
  if (!(total > 0.0)) fail(ErrorKind::Degenerate, "regression vector is zero");

  double logdet = 0.0, m = 0.0, q1 = 0.0, q2 = 0.0;
  for (Eigen::Index i = 0; i < form.dim(); ++i) {
    const double l = form.eigenvalues(i);
    const double shifted = l + theta;
    if (!(shifted > 0.0)) fail(ErrorKind::SingularPoint, "resolvent is singular at theta = 0");
    const double r = 1.0 / shifted;
    logdet += std::log(shifted);
    m += r;
    q1 += form.energy(i) * l * r;
    q2 += form.energy(i) * l * r * r;
  }
  if (!(q1 > 0.0)) fail(ErrorKind::Degenerate, "quadratic form vanished");
  const double d = static_cast<double>(form.dim());
  return {logdet / d + std::log(q1 / total), m / d - q2 / q1};
}

ObjectiveValue logprob_pop(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta_stat,
                           double theta) {
  if (!(beta_stat.squaredNorm() > 0.0)) fail(ErrorKind::Degenerate, "beta_stat is zero");
  return log_objective(population_form(sigma, beta_stat), theta);
}

ObjectiveValue logprob_plugin(const SampleAnalysis& sample, double theta) {
  return log_objective(sample.plugin_form(), theta);
}

double logprob_rmt(const SampleAnalysis& sample, const Eigen::MatrixXd& x, double theta, Rng& rng,
                   int draws) {
  const double q = quadform_estimate(sample, theta);
  if (!(q > 0.0)) fail(ErrorKind::Degenerate, "quadform estimate is not positive");
  return logdet_estimate_g1(x, theta, rng, draws) + std::log(q);
}

ThetaSolution find_theta(const ThetaObjective& objective, const std::function<double(double)>& f,
                         const std::function<double(double)>& value, bool compare_zero) {
  objective.validate();
  const int npts = objective.scan_points;
  const double tol = objective.tolerance;
  const double ratio = std::log(objective.search_cap / objective.scan_min) / (npts - 1);

  int evaluations = 0;
  double ctx_lo = objective.scan_min, ctx_hi = objective.search_cap;
  auto eval = [&](double t) {
    ++evaluations;
    try {
      return f(t);
    } catch (const Error& e) {
      throw Error(e.kind(), e.detail() + " (theta = " + std::to_string(t) +
                                ", bracket [" + std::to_string(ctx_lo) + ", " +
                                std::to_string(ctx_hi) + "])");
    }
  };

  std::vector<double> grid(static_cast<std::size_t>(npts)), fv(grid.size());
  for (int i = 0; i < npts; ++i) {
    grid[i] = i == npts - 1 ? objective.search_cap : objective.scan_min * std::exp(ratio * i);
    fv[i] = eval(grid[i]);
  }

  std::vector<Candidate> roots;
  for (int i = 0; i < npts; ++i) {
    if (std::abs(fv[i]) <= tol) {
      const bool asc = i > 0 ? fv[i - 1] < 0.0 : (i + 1 < npts && fv[i + 1] > 0.0);
      roots.push_back({grid[i], fv[i], grid[i], grid[i], asc});
    }
  }
  for (int i = 0; i + 1 < npts; ++i) {
    if (std::abs(fv[i]) <= tol || std::abs(fv[i + 1]) <= tol) continue;
    if ((fv[i] < 0.0) == (fv[i + 1] < 0.0)) continue;
    ctx_lo = grid[i];
    ctx_hi = grid[i + 1];
    const RootResult r = brent_root(eval, grid[i], grid[i + 1], fv[i], fv[i + 1], tol,
                                    1e-8 * objective.search_cap);
    roots.push_back({r.x, r.fx, r.lo, r.hi, fv[i] < 0.0});
  }

  ThetaSolution out;
  if (roots.empty()) {
    out.diagnostics.objective_residual = fv.front();
    out.diagnostics.bracket_lo = objective.scan_min;
    out.diagnostics.bracket_hi = objective.search_cap;
    out.diagnostics.evaluations = evaluations;
    return out;
  }

  std::size_t best = 0;
  if (value) {
    std::vector<double> vals;
    vals.reserve(roots.size());
    for (const Candidate& c : roots) vals.push_back(value(c.x));
    best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    if (compare_zero && value(0.0) < vals[best]) {
      out.diagnostics.objective_residual = fv.front();
      out.diagnostics.bracket_lo = 0.0;
      out.diagnostics.bracket_hi = objective.scan_min;
      out.diagnostics.evaluations = evaluations;
      return out;
    }
  } else {
    auto rank = [](const Candidate& c) { return std::make_pair(!c.ascending, std::abs(c.fx)); };
    for (std::size_t i = 1; i < roots.size(); ++i) {
      if (rank(roots[i]) < rank(roots[best])) best = i;
    }
  }
  const Candidate& c = roots[best];
  out.theta = c.x;
  out.diagnostics = {true, c.fx, c.lo, c.hi, evaluations};
  return out;
}

ThetaSolution solve_theta(const ThetaObjective& objective, const AlignedSpectrum& population) {
  if (objective.kind != ObjectiveKind::PopDerivative) {
    fail(ErrorKind::InvalidInput, "population inputs only drive the pop_derivative objective");
  }
  return find_theta(
      objective, [&](double t) { return log_objective(population, t).derivative; },
      [&](double t) { return log_objective(population, t).value; });
}

ThetaSolution solve_theta(const ThetaObjective& objective, const SampleAnalysis& sample,
                          const AlignedSpectrum* population) {
  switch (objective.kind) {
    case ObjectiveKind::PopDerivative:
      if (population == nullptr) {
        fail(ErrorKind::InvalidInput, "pop_derivative objective needs Sigma and beta_stat");
      }
      return solve_theta(objective, *population);
    case ObjectiveKind::PluginDerivative: {
      const AlignedSpectrum& form = sample.plugin_form();
      return find_theta(
          objective, [&](double t) { return log_objective(form, t).derivative; },
          [&](double t) { return log_objective(form, t).value; }, true);
    }
    case ObjectiveKind::RmtH:
      return find_theta(objective, [&](double t) { return h_rmt(sample, t); });
  }
  fail(ErrorKind::InvalidInput, "unknown objective kind");
}

ThetaSolution minimize_logprob_rmt(const ThetaObjective& objective, const SampleAnalysis& sample,
                                   const Eigen::MatrixXd& x, Rng& rng, int draws) {
  objective.validate();
  const Rng start = rng;
  Rng after = rng;
  int evaluations = 0;
  auto value = [&](double log_t) {
    Rng local = start;
    ++evaluations;
    const double v = logprob_rmt(sample, x, std::exp(log_t), local, draws);
    after = local;
    return v;
  };

  const int npts = objective.scan_points;
  const double a0 = std::log(objective.scan_min), b0 = std::log(objective.search_cap);
  const double step = (b0 - a0) / (npts - 1);
  std::vector<double> vals(static_cast<std::size_t>(npts));
  for (int i = 0; i < npts; ++i) vals[i] = value(a0 + step * i);
  const auto k = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());

  double a = a0 + step * std::max(k - 1, 0), b = a0 + step * std::min(k + 1, npts - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = value(x1), f2 = value(x2);
  while (b - a > 1e-10) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = value(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = value(x2);
    }
  }
  rng = after;
  ThetaSolution out;
  out.theta = std::exp(f1 < f2 ? x1 : x2);
  out.diagnostics = {true, b - a, std::exp(a), std::exp(b), evaluations};
  return out;
}

double resolvent_dispersion(const Eigen::VectorXd& eigenvalues, double theta) {
  const Eigen::ArrayXd r = (eigenvalues.array() + theta).inverse();
  return (r - r.mean()).square().mean();
}

EstimateSet estimate_all(const SampleAnalysis& sample, const AlignedSpectrum* population,
                         const EstimatorConfig& config) {
  ThetaObjective objective;
  objective.search_cap = config.theta_cap;
  objective.tolerance = config.tolerance;
  objective.scan_min = config.scan_min;
  objective.scan_points = config.scan_points;

  auto finish = [&](Method method, double tau, const ThetaSolution& sol,
                    const Eigen::VectorXd& eigenvalues) {
    ConfoundingEstimate e;
    e.method = method;
    e.tau = tau;
    e.theta = sol.theta;
    e.zeta = method == Method::TauCorrected ? 1.0 - 1.0 / (1.0 + tau * sol.theta)
                                            : confounding_strength(tau, sol.theta);
    e.diagnostics = sol.diagnostics;
    e.degenerate = resolvent_dispersion(eigenvalues, sol.theta) < config.degeneracy_threshold;
    return e;
  };

  const Eigen::VectorXd& sample_values = sample.plugin_form().eigenvalues;
  EstimateSet out;

  objective.kind = ObjectiveKind::PluginDerivative;
  const ThetaSolution plugin = solve_theta(objective, sample);
  out.plugin = finish(Method::Plugin, sample.tau_plugin(), plugin, sample_values);
  out.tau_corrected = finish(Method::TauCorrected, sample.tau_rmt(), plugin, sample_values);

  objective.kind = ObjectiveKind::RmtH;
  out.rmt = finish(Method::Rmt, sample.tau_rmt(), solve_theta(objective, sample), sample_values);

  if (population != nullptr) {
    objective.kind = ObjectiveKind::PopDerivative;
    const double tau = population->eigenvalues.cwiseInverse().mean();
    out.population = finish(Method::Population, tau, solve_theta(objective, *population),
                            population->eigenvalues);
  }
  return out;
}

EstimateSet estimate_all(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const EstimatorConfig& config) {
  return estimate_all(SampleAnalysis(x, y), nullptr, config);
}

}  // namespace confound
