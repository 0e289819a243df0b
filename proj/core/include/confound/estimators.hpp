#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "confound/model.hpp"
#include "confound/spectral.hpp"

namespace confound {

enum class Method { Population, Plugin, TauCorrected, Rmt };

std::string_view to_string(Method method) noexcept;

struct Diagnostics {
  bool root_found = false;
  double objective_residual = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int evaluations = 0;
};

struct ConfoundingEstimate {
  Method method = Method::Plugin;
  double tau = 0.0;
  double theta = 0.0;
  double zeta = 0.0;
  Diagnostics diagnostics;
  /// Spectral dispersion of 1/(lambda + theta) fell below the threshold;
  /// the number is returned but theta is not identifiable.
  bool degenerate = false;
};

/// tau theta / (1 + tau theta).
double confounding_strength(double tau, double theta);

enum class ObjectiveKind { PopDerivative, PluginDerivative, RmtH };

struct ThetaObjective {
  ObjectiveKind kind = ObjectiveKind::RmtH;
  double search_cap = 100.0;
  double tolerance = 1e-10;
  double scan_min = 1e-4;
  int scan_points = 64;

  void validate() const;
};

/// Eigenvalues of a covariance together with the squared coordinates of a
/// regression vector in its eigenbasis. Every resolvent functional
/// <b, S (S + t)^-k b> is a weighted sum over this pair.
struct AlignedSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd energy;

  Eigen::Index dim() const noexcept { return eigenvalues.size(); }
};

/// Population side: (Sigma, beta_stat) rotated into Sigma's eigenbasis.
AlignedSpectrum population_form(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta_stat);
/// Same, reusing the model's factorization and its ground-truth beta_stat.
AlignedSpectrum population_form(const CausalModel& model);

/// Everything the sample-based estimators need from one dataset, computed
/// once: eigendecomposition of Sigma_hat = X X^T / n, the min-norm
/// coefficients in that eigenbasis, and the noise estimate S. Samples are put
/// in a canonical order first, so results do not depend on column order.
class SampleAnalysis {
 public:
  SampleAnalysis(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  explicit SampleAnalysis(const ObservationalData& data) : SampleAnalysis(data.x(), data.y()) {}

  Eigen::Index dim() const noexcept { return d_; }
  Eigen::Index samples() const noexcept { return n_; }
  double gamma() const noexcept { return gamma_; }

  const Spectrum& covariance_spectrum() const noexcept { return cov_; }
  const Spectrum& kernel_spectrum() const noexcept { return ker_; }
  /// Sample eigenvalues and squared min-norm coefficients.
  const AlignedSpectrum& plugin_form() const noexcept { return form_; }
  const Eigen::VectorXd& beta_hat() const noexcept { return beta_hat_; }

  /// (1/d) Tr(Sigma_hat^-1); RankDeficient if Sigma_hat is numerically singular.
  double tau_plugin() const;
  double tau_rmt() const { return (1.0 - gamma_) * tau_plugin(); }
  double noise() const noexcept { return noise_; }

 private:
  Eigen::Index d_;
  Eigen::Index n_;
  double gamma_;
  Spectrum cov_;
  Spectrum ker_;
  AlignedSpectrum form_;
  Eigen::VectorXd beta_hat_;
  double noise_;
  bool full_rank_;
};

double tau_plugin(const Eigen::MatrixXd& x);
double tau_rmt(const Eigen::MatrixXd& x);
double noise_estimate_S(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Terms of the RMT objective at one theta.
struct RmtTerms {
  double eta = 0.0;
  double eta_prime = 0.0;
  double quadform = 0.0;             // q, estimates <b, S (S + t)^-1 b> / |b|^2
  double quadform_derivative = 0.0;  // q2, estimates <b, S (S + t)^-2 b> / |b|^2
  double stieltjes = 0.0;            // estimates m(-t)
  double h = 0.0;                    // (q m - q2) / q
};

RmtTerms rmt_terms(const SampleAnalysis& sample, double theta);

double quadform_estimate(const SampleAnalysis& sample, double theta);
double quadform_derivative_estimate(const SampleAnalysis& sample, double theta);
double stieltjes_estimate(const SampleAnalysis& sample, double theta);
double h_rmt(const SampleAnalysis& sample, double theta);

double quadform_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double theta);
double quadform_derivative_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    double theta);
double stieltjes_estimate(const Eigen::MatrixXd& x, double theta);
double h_rmt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double theta);

/// log theta + (1/d) log det(W W^T / (n theta)) + 1 + ((1 - gamma)/gamma) log(1 - gamma)
/// with W = X + sqrt(theta) E, averaged over `draws` independent E.
double logdet_estimate_g1(const Eigen::MatrixXd& x, double theta, Rng& rng, int draws = 1);

struct ObjectiveValue {
  double value = 0.0;
  double derivative = 0.0;
};

/// (1/d) sum log(l + t) + log(Q1) and m(-t) - Q2/Q1 over an aligned spectrum.
ObjectiveValue log_objective(const AlignedSpectrum& form, double theta);

ObjectiveValue logprob_pop(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta_stat,
                           double theta);
ObjectiveValue logprob_plugin(const SampleAnalysis& sample, double theta);

/// g1 + log q, the stochastic RMT log-objective.
double logprob_rmt(const SampleAnalysis& sample, const Eigen::MatrixXd& x, double theta, Rng& rng,
                   int draws = 1);

struct ThetaSolution {
  double theta = 0.0;
  Diagnostics diagnostics;
};

/// Geometric scan of [scan_min, search_cap] for sign changes of f, Brent
/// refinement, and root selection. With `value` set, the root minimizing it
/// wins (and `compare_zero` also admits theta = 0); without it, ascending
/// crossings are preferred, then the smallest |f|. No root gives theta = 0.
ThetaSolution find_theta(const ThetaObjective& objective, const std::function<double(double)>& f,
                         const std::function<double(double)>& value = {},
                         bool compare_zero = false);

/// PopDerivative kind needs `population`; the other kinds ignore it.
ThetaSolution solve_theta(const ThetaObjective& objective, const SampleAnalysis& sample,
                          const AlignedSpectrum* population = nullptr);
ThetaSolution solve_theta(const ThetaObjective& objective, const AlignedSpectrum& population);

/// Theta minimizing logprob_rmt on the scan grid, refined by golden section,
/// with one noise draw shared across all theta.
ThetaSolution minimize_logprob_rmt(const ThetaObjective& objective, const SampleAnalysis& sample,
                                   const Eigen::MatrixXd& x, Rng& rng, int draws = 1);

/// Var over the spectrum of 1/(l + theta).
double resolvent_dispersion(const Eigen::VectorXd& eigenvalues, double theta);

struct EstimatorConfig {
  double theta_cap = 100.0;
  double tolerance = 1e-10;
  double scan_min = 1e-4;
  int scan_points = 64;
  double degeneracy_threshold = 1e-10;
};

struct EstimateSet {
  ConfoundingEstimate plugin;
  ConfoundingEstimate tau_corrected;
  ConfoundingEstimate rmt;
  std::optional<ConfoundingEstimate> population;
};

EstimateSet estimate_all(const SampleAnalysis& sample, const AlignedSpectrum* population,
                         const EstimatorConfig& config = {});
EstimateSet estimate_all(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const EstimatorConfig& config = {});

}  // namespace confound
