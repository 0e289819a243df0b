#include "confound/oracles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "confound/errors.hpp"

namespace confound {
namespace {

double mp_integral(double c, const std::function<double(double)>& g) {
  const double sc = std::sqrt(c);
  const double lo = (1.0 - sc) * (1.0 - sc);
  const double width = (1.0 + sc) * (1.0 + sc) - lo;
  // density(l) dl = width^2 sin^2(2u) / (4 pi c l) du after substitution.
  auto integrand = [&](double u) {
    const double s = std::sin(u);
    const double l = lo + width * s * s;
    const double s2u = std::sin(2.0 * u);
    return g(l) * width * width * s2u * s2u / (4.0 * std::numbers::pi * c * l);
  };
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      integrand, 0.0, std::numbers::pi / 2.0, 20, 1e-13);
}

void require_nonnegative_theta(double theta) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) fail(ErrorKind::InvalidInput, "theta must be >= 0");
}

}  // namespace

LimitSpectrum LimitSpectrum::discrete(std::vector<double> values, std::vector<double> weights) {
  if (values.empty()) fail(ErrorKind::InvalidInput, "empty spectrum");
  if (weights.empty()) weights.assign(values.size(), 1.0 / static_cast<double>(values.size()));
  if (weights.size() != values.size()) fail(ErrorKind::InvalidInput, "weights/values size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) {
      fail(ErrorKind::InvalidInput, "atoms must be finite and >= 0");
    }
    if (!(weights[i] >= 0.0)) fail(ErrorKind::InvalidInput, "weights must be >= 0");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::InvalidInput, "weights must sum to 1");
  LimitSpectrum s;
  s.values_ = std::move(values);
  s.weights_ = std::move(weights);
  return s;
}

LimitSpectrum LimitSpectrum::point_mass(double value) { return discrete({value}, {1.0}); }

LimitSpectrum LimitSpectrum::marchenko_pastur(double c) {
  if (!(c > 0.0 && c < 1.0)) fail(ErrorKind::InvalidInput, "MP ratio must be in (0, 1)");
  LimitSpectrum s;
  s.mp_ratio_ = c;
  return s;
}

double LimitSpectrum::expect(const std::function<double(double)>& g) const {
  if (!is_discrete()) return mp_integral(mp_ratio_, g);
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += weights_[i] * g(values_[i]);
  return acc;
}

double LimitSpectrum::moment(double theta, int k) const {
  if (k != 1 && k != 2) fail(ErrorKind::InvalidInput, "moment order must be 1 or 2");
  return expect([&](double l) {
    const double r = 1.0 / (l + theta);
    return k == 1 ? r : r * r;
  });
}

double mp_moment(double c, double theta, int k) {
  require_nonnegative_theta(theta);
  return LimitSpectrum::marchenko_pastur(c).moment(theta, k);
}

double f_pop_limit(double theta, double theta_star, const LimitSpectrum& nu) {
  require_nonnegative_theta(theta);
  const double m = nu.moment(theta, 1);
  const double var = nu.expect([&](double l) {
    const double dev = 1.0 / (l + theta) - m;
    return dev * dev;
  });
  const double ratio = nu.expect([&](double l) { return (l + theta_star) / (l + theta); });
  return (theta - theta_star) * var / ratio;
}

double f_plugin_limit(double theta, double theta_star, double gamma, double gamma_tilde,
                      const LimitSpectrum& mu) {
  require_nonnegative_theta(theta);
  const double m = mu.moment(theta, 1);
  const double mm = mu.moment(theta, 2);
  const double var = mm - m * m;
  const double denom = 1.0 - theta * m + (1.0 - 2.0 * gamma + gamma * gamma_tilde) * theta_star * m +
                       gamma * theta * theta_star * m * m;
  if (std::abs(denom) < 1e-12) fail(ErrorKind::Degenerate, "plug-in limit denominator vanished");
  if (var == 0.0) return 0.0;
  const double bracket = theta - (1.0 + gamma * gamma_tilde) * theta_star +
                         gamma * theta_star * (1.0 - theta * m) * (1.0 + mm / var);
  return bracket * var / denom;
}

double plugin_consistency_condition(double theta_star, double gamma_tilde, const LimitSpectrum& mu) {
  require_nonnegative_theta(theta_star);
  const double m = mu.moment(theta_star, 1);
  const double mm = mu.moment(theta_star, 2);
  const double var = mm - m * m;
  if (std::abs(var) < 1e-12) fail(ErrorKind::Degenerate, "spectrum has no dispersion");
  return gamma_tilde - (1.0 - theta_star * m) * (1.0 + mm / var);
}

std::pair<double, double> mixed_trace_limits(double theta, double gamma, const LimitSpectrum& mu) {
  require_nonnegative_theta(theta);
  const double m = mu.moment(theta, 1);
  const double mm = mu.moment(theta, 2);
  return {gamma * theta * m * m + (1.0 - gamma) * m,
          -gamma * m * m + 2.0 * gamma * theta * m * mm + (1.0 - gamma) * mm};
}

}  // namespace confound
