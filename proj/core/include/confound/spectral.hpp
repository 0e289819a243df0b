#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace confound {

/// Sorted eigenvalue multiset of a symmetric positive-semidefinite matrix,
/// normalized by an ambient dimension `size`. When fewer than `size`
/// eigenvalues are stored, the remainder are implicit zeros; this is how a
/// kernel spectrum (n x n, rank d) shares storage with its covariance (d x d).
class Spectrum {
 public:
  /// Entries with |v| <= zero_tolerance are stored as exact zeros. Entries
  /// below -zero_tolerance, non-finite entries, or more entries than `size`
  /// raise InvalidInput.
  Spectrum(std::vector<double> eigenvalues, std::size_t size, double zero_tolerance = 0.0);

  std::span<const double> eigenvalues() const noexcept { return values_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t stored() const noexcept { return values_.size(); }
  std::size_t implicit_zeros() const noexcept { return size_ - values_.size(); }
  /// Explicit plus implicit zero eigenvalues.
  std::size_t zero_count() const noexcept;
  double max() const noexcept { return values_.empty() ? 0.0 : values_.back(); }
  /// Smallest stored eigenvalue, or 0 if there are implicit zeros.
  double min() const noexcept;

  /// Same nonzero eigenvalues in a larger ambient dimension (extra zeros).
  Spectrum embedded(std::size_t new_size) const;

 private:
  std::vector<double> values_;
  std::size_t size_;
};

struct StieltjesQuery {
  double point = 0.0;
  int order = 1;  // 1: m(z) = (1/size) sum 1/(l - z); 2: (1/size) sum 1/(l - z)^2
};

enum class GramSide {
  Covariance,  // scale * X X^T, size d
  Kernel,      // scale * X^T X, size n
};

Spectrum spectrum_of_gram(const Eigen::MatrixXd& x, double scale, GramSide side);

double stieltjes(const Spectrum& spec, StieltjesQuery q);

/// The unique eta < 0 with m~(eta) = 1/theta, where m~ is the Stieltjes
/// transform of the kernel spectrum. Safeguarded Newton on a bracket that is
/// bisected geometrically (the transform is stiff near 0-).
double solve_eta(const Spectrum& kernel_spec, double theta);

/// eta' = 1 / (theta^2 m~'(eta)).
double eta_derivative(const Spectrum& kernel_spec, double theta, double eta);

/// Minimum-norm least squares coefficients ((1/n) X X^T)^+ (1/n) X Y.
Eigen::VectorXd min_norm_regress(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace confound
