#pragma once

#include <Eigen/Dense>

namespace confound {

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors as
/// the matching columns.
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Symmetrizes (A + A^T)/2 and runs a divide-and-conquer symmetric eigensolver.
EigenSystem symmetric_eigen(const Eigen::MatrixXd& a);
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a);

/// scale * X X^T, exactly symmetric.
Eigen::MatrixXd gram_rows(const Eigen::MatrixXd& x, double scale);

/// Q factor of a thin QR with the sign convention diag(R) > 0, which makes
/// Q Haar-distributed when the input is standard Gaussian.
Eigen::MatrixXd orthonormal_columns(Eigen::MatrixXd a);

/// Conventional numerical-rank cutoff max(rows, cols) * eps * lambda_max.
double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double lambda_max);

/// True when the LAPACK backend reproduces a known eigen/QR factorization.
/// Evaluated once; when false, the routines above use Eigen's solvers.
bool lapack_self_check();

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& a);

}  // namespace confound
