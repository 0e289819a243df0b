#include "confound/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "confound/errors.hpp"
#include "confound/linalg.hpp"

namespace confound {
namespace {

void require_scale(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    fail(ErrorKind::InvalidInput, std::string(name) + " must be finite and >= 0");
  }
}

Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  fill_standard_normal(v, rng);
  return v;
}

MixingFactors factorize(const Eigen::MatrixXd& mixing) {
  if (mixing.rows() == 0 || mixing.cols() < mixing.rows()) {
    fail(ErrorKind::InvalidInput, "mixing matrix must be d x l with l >= d > 0");
  }
  if (!all_finite(mixing)) fail(ErrorKind::InvalidInput, "non-finite mixing entry");
  EigenSystem eig = symmetric_eigen(gram_rows(mixing, 1.0));
  const double sv_max = std::sqrt(std::max(eig.values.maxCoeff(), 0.0));
  const double sv_min = std::sqrt(std::max(eig.values.minCoeff(), 0.0));
  if (!(sv_min > rank_tolerance(mixing.rows(), mixing.cols(), sv_max))) {
    fail(ErrorKind::RankDeficient, "mixing matrix does not have full row rank");
  }
  MixingFactors f;
  f.right = mixing.transpose() * eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal();
  f.left = std::move(eig.vectors);
  f.eigenvalues = std::move(eig.values);
  return f;
}

CausalModel assemble(int d, double gamma_tilde, double c, double sigma_beta2, double sigma_eps2,
                     Rng& rng, const auto& sigma_alpha_from_tau) {
  if (d < 1) fail(ErrorKind::InvalidInput, "d must be >= 1");
  if (!(gamma_tilde >= 1.0)) fail(ErrorKind::InvalidInput, "gamma_tilde must be >= 1");
  if (!(sigma_beta2 > 0.0) || !std::isfinite(sigma_beta2)) {
    fail(ErrorKind::InvalidInput, "sigma_beta2 must be > 0");
  }
  require_scale(sigma_eps2, "sigma_eps2");
  const auto l = static_cast<Eigen::Index>(std::llround(gamma_tilde * d));
  if (l < d) fail(ErrorKind::InvalidInput, "round(gamma_tilde * d) must be >= d");

  const std::vector<double> lambdas = sample_mp_eigenvalues(d, c, rng);
  MixingFactors f;
  f.eigenvalues = Eigen::Map<const Eigen::VectorXd>(lambdas.data(), d);
  f.left = haar_semi_orthogonal(d, d, rng);
  f.right = haar_semi_orthogonal(l, d, rng);

  const double tau = f.eigenvalues.cwiseInverse().mean();
  const double sigma_alpha2 = sigma_alpha_from_tau(tau);
  require_scale(sigma_alpha2, "sigma_alpha2");

  Eigen::VectorXd alpha = std::sqrt(sigma_alpha2) * standard_normal_vector(l, rng);
  Eigen::VectorXd beta = std::sqrt(sigma_beta2) * standard_normal_vector(d, rng);
  return CausalModel(std::move(f), std::move(alpha), std::move(beta), sigma_eps2, sigma_alpha2,
                     sigma_beta2);
}

}  // namespace

MarchenkoPastur::MarchenkoPastur(double ratio) : c(ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorKind::InvalidInput, "MP ratio c must be in (0, 1)");
}

double MarchenkoPastur::lower() const noexcept {
  const double s = 1.0 - std::sqrt(c);
  return s * s;
}

double MarchenkoPastur::upper() const noexcept {
  const double s = 1.0 + std::sqrt(c);
  return s * s;
}

double MarchenkoPastur::density(double lambda) const noexcept {
  const double inside = std::max(lambda - lower(), 0.0) * std::max(upper() - lambda, 0.0);
  if (inside <= 0.0) return 0.0;
  return std::sqrt(inside) / (2.0 * std::numbers::pi * c * lambda);
}

double MarchenkoPastur::density_max() const {
  // The density is unimodal on its support.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lower(), b = upper();
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = density(x1), f2 = density(x2);
  for (int i = 0; i < 200 && (b - a) > 1e-13 * upper(); ++i) {
    if (f1 < f2) {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = density(x2);
    } else {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = density(x1);
    }
  }
  return std::max(f1, f2);
}

std::vector<double> sample_mp_eigenvalues(int d, double c, Rng& rng) {
  if (d < 1) fail(ErrorKind::InvalidInput, "d must be >= 1");
  const MarchenkoPastur law(c);
  // Small margin over the located maximum keeps the envelope a strict bound.
  const double envelope = law.density_max() * (1.0 + 1e-6);
  std::uniform_real_distribution<double> position(law.lower(), law.upper());
  std::uniform_real_distribution<double> height(0.0, envelope);

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(d));
  while (out.size() < static_cast<std::size_t>(d)) {
    const double lambda = position(rng);
    if (height(rng) < law.density(lambda)) out.push_back(lambda);
  }
  return out;
}

void fill_standard_normal(Eigen::Ref<Eigen::MatrixXd> out, Rng& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
  }
}

Eigen::MatrixXd haar_semi_orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (cols < 1 || rows < cols) fail(ErrorKind::InvalidInput, "haar_semi_orthogonal needs rows >= cols >= 1");
  Eigen::MatrixXd g(rows, cols);
  fill_standard_normal(g, rng);
  return orthonormal_columns(std::move(g));
}

CausalModel::CausalModel(Eigen::MatrixXd mixing, Eigen::VectorXd alpha, Eigen::VectorXd beta,
                         double sigma_eps2, double sigma_alpha2, double sigma_beta2)
    : mixing_(std::move(mixing)),
      factors_(factorize(mixing_)),
      alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      sigma_eps2_(sigma_eps2),
      sigma_alpha2_(sigma_alpha2),
      sigma_beta2_(sigma_beta2) {
  validate();
}

CausalModel::CausalModel(MixingFactors factors, Eigen::VectorXd alpha, Eigen::VectorXd beta,
                         double sigma_eps2, double sigma_alpha2, double sigma_beta2)
    : factors_(std::move(factors)),
      alpha_(std::move(alpha)),
      beta_(std::move(beta)),
      sigma_eps2_(sigma_eps2),
      sigma_alpha2_(sigma_alpha2),
      sigma_beta2_(sigma_beta2) {
  const auto d = factors_.eigenvalues.size();
  if (factors_.left.rows() != d || factors_.left.cols() != d || factors_.right.cols() != d ||
      factors_.right.rows() < d) {
    fail(ErrorKind::InvalidInput, "inconsistent mixing factor shapes");
  }
  if (!(factors_.eigenvalues.minCoeff() > 0.0)) {
    fail(ErrorKind::RankDeficient, "mixing factors have a zero singular value");
  }
  mixing_ = factors_.left * factors_.eigenvalues.cwiseSqrt().asDiagonal() *
            factors_.right.transpose();
  validate();
}

void CausalModel::validate() const {
  if (alpha_.size() != latent_dim()) fail(ErrorKind::InvalidInput, "alpha must have length l");
  if (beta_.size() != dim()) fail(ErrorKind::InvalidInput, "beta must have length d");
  if (!alpha_.allFinite() || !beta_.allFinite()) fail(ErrorKind::InvalidInput, "non-finite mechanism");
  require_scale(sigma_eps2_, "sigma_eps2");
  require_scale(sigma_alpha2_, "sigma_alpha2");
  require_scale(sigma_beta2_, "sigma_beta2");
}

Eigen::MatrixXd CausalModel::covariance() const {
  return factors_.left * factors_.eigenvalues.asDiagonal() * factors_.left.transpose();
}

ObservationalData::ObservationalData(Eigen::MatrixXd x, Eigen::VectorXd y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.cols() != y_.size()) fail(ErrorKind::InvalidInput, "X columns must equal length of Y");
  if (x_.size() == 0) fail(ErrorKind::InvalidInput, "empty dataset");
}

double calibrate_sigma_alpha(double zeta_target, double sigma_beta2, double tau,
                             AlphaCalibration calibration) {
  if (!(zeta_target >= 0.0 && zeta_target < 1.0)) {
    fail(ErrorKind::InvalidInput, "zeta_target must lie in [0, 1)");
  }
  switch (calibration) {
    case AlphaCalibration::Exact:
      return zeta_target * sigma_beta2 / ((1.0 - zeta_target) * tau);
    case AlphaCalibration::PaperLiteral:
      return (sigma_beta2 * (1.0 - zeta_target) + zeta_target * tau) / (1.0 - zeta_target);
  }
  return 0.0;
}

CausalModel build_model(int d, double gamma_tilde, double c, double zeta_target,
                        double sigma_beta2, double sigma_eps2, Rng& rng,
                        AlphaCalibration calibration) {
  if (!(zeta_target >= 0.0 && zeta_target < 1.0)) {
    fail(ErrorKind::InvalidInput, "zeta_target must lie in [0, 1); 1 would need sigma_beta = 0");
  }
  return assemble(d, gamma_tilde, c, sigma_beta2, sigma_eps2, rng, [&](double tau) {
    return calibrate_sigma_alpha(zeta_target, sigma_beta2, tau, calibration);
  });
}

CausalModel build_model_with_theta(int d, double gamma_tilde, double c, double theta_star,
                                   double sigma_beta2, double sigma_eps2, Rng& rng) {
  require_scale(theta_star, "theta_star");
  return assemble(d, gamma_tilde, c, sigma_beta2, sigma_eps2, rng,
                  [&](double) { return theta_star * sigma_beta2; });
}

ObservationalData draw_observations(const CausalModel& model, Eigen::Index n, Rng& rng) {
  if (n <= model.dim()) fail(ErrorKind::InvalidInput, "need n > d (gamma < 1)");
  Eigen::MatrixXd z(model.latent_dim(), n);
  fill_standard_normal(z, rng);
  Eigen::VectorXd eps = standard_normal_vector(n, rng);

  Eigen::MatrixXd x = model.mixing() * z;
  Eigen::VectorXd y = x.transpose() * model.beta() + z.transpose() * model.alpha() +
                      std::sqrt(model.sigma_eps2()) * eps;
  return ObservationalData(std::move(x), std::move(y));
}

GroundTruth ground_truth(const CausalModel& model) {
  const MixingFactors& f = model.factors();
  if (!(f.eigenvalues.minCoeff() > 0.0)) fail(ErrorKind::RankDeficient, "singular covariance");

  // M^+ = V diag(1/sqrt(lambda)) U^T, and I - M^+ M projects off range(V).
  const Eigen::VectorXd va = f.right.transpose() * model.alpha();
  const Eigen::VectorXd shift =
      f.left * (va.array() / f.eigenvalues.array().sqrt()).matrix();
  const Eigen::VectorXd residual = model.alpha() - f.right * va;

  GroundTruth gt;
  gt.beta_stat = model.beta() + shift;
  gt.sigma_stat2 = model.sigma_eps2() + residual.squaredNorm();
  const double num = shift.squaredNorm();
  const double den = model.beta().squaredNorm() + num;
  gt.zeta = den > 0.0 ? num / den : 0.0;
  gt.tau_pop = f.eigenvalues.cwiseInverse().mean();
  gt.theta_true = model.sigma_beta2() > 0.0
                      ? model.sigma_alpha2() / model.sigma_beta2()
                      : std::numeric_limits<double>::infinity();
  return gt;
}

double statistical_noise_limit_check(const CausalModel& model) {
  const GroundTruth gt = ground_truth(model);
  return gt.sigma_stat2 / static_cast<double>(model.dim()) -
         (model.gamma_tilde() - 1.0) * model.sigma_alpha2();
}

}  // namespace confound
