#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

namespace confound {

using Rng = std::mt19937_64;

/// Marchenko-Pastur law with ratio c in (0, 1): density
/// sqrt((l - c-)^+ (c+ - l)^+) / (2 pi c l) on [c-, c+], c+- = (1 +- sqrt c)^2.
struct MarchenkoPastur {
  explicit MarchenkoPastur(double ratio);

  double c;
  double lower() const noexcept;
  double upper() const noexcept;
  double density(double lambda) const noexcept;
  /// Maximum of the density, located by golden-section search.
  double density_max() const;
};

std::vector<double> sample_mp_eigenvalues(int d, double c, Rng& rng);

/// rows x cols matrix with orthonormal columns, Haar on the Stiefel manifold.
Eigen::MatrixXd haar_semi_orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

void fill_standard_normal(Eigen::Ref<Eigen::MatrixXd> out, Rng& rng);

/// Thin SVD of the mixing matrix M = left * diag(sqrt(eigenvalues)) * right^T.
/// `eigenvalues` are those of Sigma = M M^T (ascending), `left` is d x d
/// orthogonal and `right` is l x d with orthonormal columns.
struct MixingFactors {
  Eigen::MatrixXd left;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd right;
};

/// Linear-Gaussian causal model
///   z ~ N(0, I_l), eps ~ N(0, sigma_eps2), x = M z, y = x^T beta + z^T alpha + eps.
/// sigma_alpha2 / sigma_beta2 are the prior variances alpha and beta were drawn with.
class CausalModel {
 public:
  /// Factorizes M; raises RankDeficient if rank(M) < d and InvalidInput for
  /// shape or scale violations.
  CausalModel(Eigen::MatrixXd mixing, Eigen::VectorXd alpha, Eigen::VectorXd beta,
              double sigma_eps2, double sigma_alpha2, double sigma_beta2);
  CausalModel(MixingFactors factors, Eigen::VectorXd alpha, Eigen::VectorXd beta,
              double sigma_eps2, double sigma_alpha2, double sigma_beta2);

  const Eigen::MatrixXd& mixing() const noexcept { return mixing_; }
  const MixingFactors& factors() const noexcept { return factors_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  double sigma_eps2() const noexcept { return sigma_eps2_; }
  double sigma_alpha2() const noexcept { return sigma_alpha2_; }
  double sigma_beta2() const noexcept { return sigma_beta2_; }

  Eigen::Index dim() const noexcept { return mixing_.rows(); }
  Eigen::Index latent_dim() const noexcept { return mixing_.cols(); }
  double gamma_tilde() const noexcept {
    return static_cast<double>(latent_dim()) / static_cast<double>(dim());
  }
  /// Sigma = M M^T reassembled from the factors.
  Eigen::MatrixXd covariance() const;

 private:
  void validate() const;

  Eigen::MatrixXd mixing_;
  MixingFactors factors_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd beta_;
  double sigma_eps2_;
  double sigma_alpha2_;
  double sigma_beta2_;
};

/// Features X (d x n, one sample per column) and responses Y (n).
class ObservationalData {
 public:
  ObservationalData(Eigen::MatrixXd x, Eigen::VectorXd y);

  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  Eigen::Index dim() const noexcept { return x_.rows(); }
  Eigen::Index samples() const noexcept { return x_.cols(); }
  double gamma() const noexcept {
    return static_cast<double>(dim()) / static_cast<double>(samples());
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

struct GroundTruth {
  Eigen::VectorXd beta_stat;  // beta + M^{+T} alpha
  double sigma_stat2;         // sigma_eps2 + alpha^T (I - M^+ M) alpha
  double zeta;                // confounding strength
  double tau_pop;             // (1/d) Tr(Sigma^-1)
  double theta_true;          // sigma_alpha2 / sigma_beta2
};

enum class AlphaCalibration {
  /// sigma_alpha = zeta' sigma_beta / ((1 - zeta') tau), so that the
  /// concentrated strength tau theta / (1 + tau theta) equals zeta'.
  Exact,
  /// (sigma_beta (1 - zeta') + zeta' tau) / (1 - zeta'), kept for comparison.
  PaperLiteral,
};

double calibrate_sigma_alpha(double zeta_target, double sigma_beta2, double tau,
                             AlphaCalibration calibration);

/// Model with MP(c) covariance spectrum, Haar singular vectors, l = round(gamma_tilde d),
/// and sigma_alpha calibrated to zeta_target (in [0, 1)) using the realized tau.
CausalModel build_model(int d, double gamma_tilde, double c, double zeta_target,
                        double sigma_beta2, double sigma_eps2, Rng& rng,
                        AlphaCalibration calibration = AlphaCalibration::Exact);

/// Same generator with the mechanism ratio fixed: sigma_alpha2 = theta_star * sigma_beta2.
CausalModel build_model_with_theta(int d, double gamma_tilde, double c, double theta_star,
                                   double sigma_beta2, double sigma_eps2, Rng& rng);

ObservationalData draw_observations(const CausalModel& model, Eigen::Index n, Rng& rng);

GroundTruth ground_truth(const CausalModel& model);

/// sigma_stat2 / d - (gamma_tilde - 1) sigma_alpha2; vanishes as d grows.
double statistical_noise_limit_check(const CausalModel& model);

}  // namespace confound
