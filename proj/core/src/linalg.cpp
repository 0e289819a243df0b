#include "confound/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>

#include "confound/errors.hpp"

namespace confound {
namespace {

lapack_int checked_dim(Eigen::Index n) {
  if (n > std::numeric_limits<lapack_int>::max()) {
    fail(ErrorKind::InvalidInput, "matrix dimension exceeds LAPACK index range");
  }
  return static_cast<lapack_int>(n);
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    fail(ErrorKind::InvalidInput, "symmetric eigensolver needs a non-empty square matrix");
  }
  if (!all_finite(a)) fail(ErrorKind::InvalidInput, "non-finite matrix entry");
  Eigen::MatrixXd s = 0.5 * (a + a.transpose());
  return s;
}

Eigen::MatrixXd probe_matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd b(rows, cols);
  std::uint64_t state = 0x2545F4914F6CDD1DULL;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      b(i, j) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  return b;
}

// Some optimized LAPACK builds pick CPU kernels that return wrong results
// once blocked code paths kick in; probe both routines above that size.
bool probe_lapack() {
  constexpr lapack_int n = 320;
  const Eigen::MatrixXd b = probe_matrix(n, n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a.selfadjointView<Eigen::Lower>().rankUpdate(b, 1.0 / n);
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();

  Eigen::MatrixXd v = a;
  Eigen::VectorXd w(n);
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, v.data(), n, w.data()) != 0) return false;
  const double scale = a.norm();
  if (!((a * v - v * w.asDiagonal()).norm() <= 1e-10 * scale)) return false;

  Eigen::MatrixXd q = b;
  Eigen::VectorXd tau(n);
  if (LAPACKE_dgeqrf(LAPACK_COL_MAJOR, n, n, q.data(), n, tau.data()) != 0) return false;
  if (LAPACKE_dorgqr(LAPACK_COL_MAJOR, n, n, n, q.data(), n, tau.data()) != 0) return false;
  return (q.transpose() * q - Eigen::MatrixXd::Identity(n, n)).norm() <= 1e-10;
}

bool use_lapack() {
  static const bool ok = [] {
    const bool pass = probe_lapack();
    if (!pass) {
      std::cerr << "confound: LAPACK self-check failed, using the slower built-in solvers "
                   "(for OpenBLAS, try OPENBLAS_CORETYPE=Haswell)\n";
    }
    return pass;
  }();
  return ok;
}

}  // namespace

bool lapack_self_check() { return use_lapack(); }

EigenSystem symmetric_eigen(const Eigen::MatrixXd& a) {
  EigenSystem out;
  out.vectors = symmetrized(a);
  if (!use_lapack()) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.vectors);
    if (es.info() != Eigen::Success) fail(ErrorKind::InvalidInput, "eigensolver did not converge");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    return out;
  }
  const lapack_int n = checked_dim(out.vectors.rows());
  out.values.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, out.vectors.data(), n,
                                         out.values.data());
  if (info != 0) {
    fail(ErrorKind::InvalidInput, "dsyevd failed with info=" + std::to_string(info));
  }
  return out;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd work = symmetrized(a);
  if (!use_lapack()) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) fail(ErrorKind::InvalidInput, "eigensolver did not converge");
    return es.eigenvalues();
  }
  const lapack_int n = checked_dim(work.rows());
  Eigen::VectorXd values(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(), n, values.data());
  if (info != 0) {
    fail(ErrorKind::InvalidInput, "dsyevd failed with info=" + std::to_string(info));
  }
  return values;
}

Eigen::MatrixXd gram_rows(const Eigen::MatrixXd& x, double scale) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(x, scale);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

Eigen::MatrixXd orthonormal_columns(Eigen::MatrixXd a) {
  const lapack_int m = checked_dim(a.rows());
  const lapack_int n = checked_dim(a.cols());
  if (m < n || n == 0) fail(ErrorKind::InvalidInput, "orthonormal_columns needs rows >= cols > 0");
  if (!use_lapack()) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::VectorXd sign = qr.matrixQR().diagonal().unaryExpr(
        [](double r) { return r < 0.0 ? -1.0 : 1.0; });
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
    return q * sign.asDiagonal();
  }
  Eigen::VectorXd tau(n);
  lapack_int info = LAPACKE_dgeqrf(LAPACK_COL_MAJOR, m, n, a.data(), m, tau.data());
  if (info != 0) fail(ErrorKind::InvalidInput, "dgeqrf failed with info=" + std::to_string(info));
  Eigen::VectorXd r_sign(n);
  for (lapack_int j = 0; j < n; ++j) r_sign(j) = a(j, j) < 0.0 ? -1.0 : 1.0;
  info = LAPACKE_dorgqr(LAPACK_COL_MAJOR, m, n, n, a.data(), m, tau.data());
  if (info != 0) fail(ErrorKind::InvalidInput, "dorgqr failed with info=" + std::to_string(info));
  return a * r_sign.asDiagonal();
}

double rank_tolerance(Eigen::Index rows, Eigen::Index cols, double lambda_max) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() *
         std::abs(lambda_max);
}

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& a) { return a.allFinite(); }

}  // namespace confound
