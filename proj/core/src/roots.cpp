#include "confound/roots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "confound/errors.hpp"

namespace confound {

RootResult brent_root(const std::function<double(double)>& f, double lo, double hi, double f_lo,
                      double f_hi, double f_tol, double x_tol, int max_iter) {
  RootResult out;
  if (f_lo == 0.0) return {lo, 0.0, lo, lo, 0, true};
  if (f_hi == 0.0) return {hi, 0.0, hi, hi, 0, true};
  if ((f_lo < 0.0) == (f_hi < 0.0)) fail(ErrorKind::InvalidInput, "brent_root: root not bracketed");

  // b is the current best estimate, a the previous one, c keeps the bracket.
  double a = lo, fa = f_lo, b = hi, fb = f_hi;
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb < 0.0) == (fc < 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * x_tol;
    const double half = 0.5 * (c - b);
    if (std::abs(fb) <= f_tol || std::abs(half) <= tol1 || fb == 0.0) {
      out.converged = true;
      break;
    }
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * half * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * half * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * half * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = half;
        e = d;
      }
    } else {
      d = half;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (half > 0.0 ? tol1 : -tol1);
    fb = f(b);
    ++out.evaluations;
  }
  out.x = b;
  out.fx = fb;
  out.lo = std::min(b, c);
  out.hi = std::max(b, c);
  return out;
}

}  // namespace confound
