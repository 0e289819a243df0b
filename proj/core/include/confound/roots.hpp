#pragma once

#include <functional>

namespace confound {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  double lo = 0.0;  // final bracket
  double hi = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Brent's method on a sign-changing bracket. Stops when |f| <= f_tol or the
/// bracket is narrower than x_tol. f_lo and f_hi are the already-known
/// endpoint values and must have opposite signs (or one of them be zero).
RootResult brent_root(const std::function<double(double)>& f, double lo, double hi, double f_lo,
                      double f_hi, double f_tol, double x_tol, int max_iter = 200);

}  // namespace confound
