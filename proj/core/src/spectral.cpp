#include "confound/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "confound/errors.hpp"
#include "confound/linalg.hpp"

namespace confound {

Spectrum::Spectrum(std::vector<double> eigenvalues, std::size_t size, double zero_tolerance)
    : values_(std::move(eigenvalues)), size_(size) {
  if (size_ == 0) fail(ErrorKind::InvalidInput, "spectrum size must be positive");
  if (values_.size() > size_) {
    fail(ErrorKind::InvalidInput, "more eigenvalues than the ambient dimension");
  }
  if (!(zero_tolerance >= 0.0)) fail(ErrorKind::InvalidInput, "zero tolerance must be >= 0");
  for (double& v : values_) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "non-finite eigenvalue");
    if (v < -zero_tolerance) {
      fail(ErrorKind::InvalidInput, "negative eigenvalue " + std::to_string(v));
    }
    if (std::abs(v) <= zero_tolerance) v = 0.0;
  }
  std::sort(values_.begin(), values_.end());
}

std::size_t Spectrum::zero_count() const noexcept {
  const auto explicit_zeros = static_cast<std::size_t>(
      std::upper_bound(values_.begin(), values_.end(), 0.0) - values_.begin());
  return explicit_zeros + implicit_zeros();
}

double Spectrum::min() const noexcept {
  if (implicit_zeros() > 0 || values_.empty()) return 0.0;
  return values_.front();
}

Spectrum Spectrum::embedded(std::size_t new_size) const {
  if (new_size < size_) fail(ErrorKind::InvalidInput, "cannot embed into a smaller dimension");
  return Spectrum(values_, new_size);
}

Spectrum spectrum_of_gram(const Eigen::MatrixXd& x, double scale, GramSide side) {
  if (x.size() == 0) fail(ErrorKind::InvalidInput, "empty data matrix");
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::InvalidInput, "scale must be > 0");
  if (!all_finite(x)) fail(ErrorKind::InvalidInput, "non-finite entry in X");

  const Eigen::MatrixXd gram =
      side == GramSide::Covariance ? gram_rows(x, scale) : gram_rows(x.transpose(), scale);
  const Eigen::VectorXd values = symmetric_eigenvalues(gram);
  const double tol = rank_tolerance(x.rows(), x.cols(), values.maxCoeff());
  return Spectrum(std::vector<double>(values.begin(), values.end()),
                  static_cast<std::size_t>(values.size()), tol);
}

double stieltjes(const Spectrum& spec, StieltjesQuery q) {
  if (q.order != 1 && q.order != 2) fail(ErrorKind::InvalidInput, "Stieltjes order must be 1 or 2");
  if (!std::isfinite(q.point)) fail(ErrorKind::InvalidInput, "non-finite evaluation point");

  double sum = 0.0;
  for (double lambda : spec.eigenvalues()) {
    const double gap = lambda - q.point;
    if (gap == 0.0) {
      fail(ErrorKind::SingularPoint, "evaluation at eigenvalue " + std::to_string(lambda));
    }
    sum += q.order == 1 ? 1.0 / gap : 1.0 / (gap * gap);
  }
  if (const auto zeros = spec.implicit_zeros(); zeros > 0) {
    if (q.point == 0.0) fail(ErrorKind::SingularPoint, "evaluation at eigenvalue 0");
    const double gap = -q.point;
    sum += static_cast<double>(zeros) * (q.order == 1 ? 1.0 / gap : 1.0 / (gap * gap));
  }
  return sum / static_cast<double>(spec.size());
}

double solve_eta(const Spectrum& kernel_spec, double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) fail(ErrorKind::InvalidInput, "theta must be > 0");
  const double target = 1.0 / theta;
  auto residual = [&](double eta) { return stieltjes(kernel_spec, {eta, 1}) - target; };

  // m~ is strictly increasing on the negative axis, so f(lo) < 0 < f(hi).
  double lo = -theta * (kernel_spec.max() + 1.0) * 10.0;
  double hi = -1e-12;
  double f_lo = residual(lo);
  for (int i = 0; i < 64 && f_lo >= 0.0; ++i) {
    lo *= 10.0;
    f_lo = residual(lo);
  }
  double f_hi = residual(hi);
  if (kernel_spec.zero_count() > 0) {
    for (int i = 0; i < 64 && f_hi <= 0.0 && hi > -1e-290; ++i) {
      hi *= 1e-4;
      f_hi = residual(hi);
    }
  }
  if (f_lo >= 0.0 || f_hi <= 0.0) {
    fail(ErrorKind::NoSolution, "1/theta = " + std::to_string(target) +
                                    " lies outside the range of the kernel transform on (-inf, 0)");
  }
  if (f_hi == 0.0) return hi;

  double eta = -std::sqrt(lo * hi);
  double f = residual(eta);
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * target;
  for (int iter = 0; iter < 400 && std::abs(f) > floor; ++iter) {
    if (f < 0.0) {
      lo = eta;
    } else {
      hi = eta;
    }
    if ((hi - lo) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(lo)) break;

    const double slope = stieltjes(kernel_spec, {eta, 2});
    double next = eta - f / slope;
    if (!(next > lo && next < hi)) next = -std::sqrt(lo * hi);
    eta = next;
    f = residual(eta);
  }
  if (std::abs(f) > 1e-10 * target) {
    fail(ErrorKind::NoSolution, "eta solver did not reach the residual tolerance");
  }
  return eta;
}

double eta_derivative(const Spectrum& kernel_spec, double theta, double eta) {
  const double slope = stieltjes(kernel_spec, {eta, 2});
  return 1.0 / (theta * theta * slope);
}

Eigen::VectorXd min_norm_regress(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() != y.size()) fail(ErrorKind::InvalidInput, "X columns must match Y length");
  if (x.size() == 0) fail(ErrorKind::InvalidInput, "empty data matrix");
  if (!all_finite(x) || !y.allFinite()) fail(ErrorKind::InvalidInput, "non-finite input");

  const double inv_n = 1.0 / static_cast<double>(x.cols());
  const EigenSystem eig = symmetric_eigen(gram_rows(x, inv_n));
  const double tol = rank_tolerance(x.rows(), x.cols(), eig.values.maxCoeff());
  const Eigen::VectorXd b = inv_n * (x * y);

  Eigen::VectorXd coords = eig.vectors.transpose() * b;
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    coords(i) = eig.values(i) > tol ? coords(i) / eig.values(i) : 0.0;
  }
  return eig.vectors * coords;
}

}  // namespace confound
