#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace confound {

/// Limiting spectral distribution: either a weighted list of atoms or the
/// Marchenko-Pastur law MP(c) with unit mean.
class LimitSpectrum {
 public:
  /// Empty weights mean uniform. Weights must be >= 0 and sum to 1 (to 1e-12).
  static LimitSpectrum discrete(std::vector<double> values, std::vector<double> weights = {});
  static LimitSpectrum point_mass(double value);
  static LimitSpectrum marchenko_pastur(double c);

  bool is_discrete() const noexcept { return mp_ratio_ <= 0.0; }
  double mp_ratio() const noexcept { return mp_ratio_; }

  /// E[g(lambda)]. MP expectations use adaptive Gauss-Kronrod on
  /// lambda = c- + (c+ - c-) sin^2(u), which removes the square-root edges.
  double expect(const std::function<double(double)>& g) const;
  /// E[1 / (lambda + theta)^k], k in {1, 2}.
  double moment(double theta, int k) const;

 private:
  LimitSpectrum() = default;

  std::vector<double> values_;
  std::vector<double> weights_;
  double mp_ratio_ = 0.0;
};

/// E[1/(lambda + theta)^k] under MP(c).
double mp_moment(double c, double theta, int k);

/// (theta - theta*) Var[1/(l + theta)] / E[(l + theta*)/(l + theta)] over nu.
double f_pop_limit(double theta, double theta_star, const LimitSpectrum& nu);

/// Limiting plug-in derivative over the limiting sample spectrum mu.
/// Degenerate if the denominator of its h factor is below 1e-12.
double f_plugin_limit(double theta, double theta_star, double gamma, double gamma_tilde,
                      const LimitSpectrum& mu);

/// gamma_tilde - (1 - theta* m)(1 + M / (M - m^2)) at -theta*; zero when the
/// plug-in estimator happens to be consistent.
double plugin_consistency_condition(double theta_star, double gamma_tilde, const LimitSpectrum& mu);

/// Limits of (1/d) Tr[(S + t)^-1 S Sigma^+] and (1/d) Tr[(S + t)^-2 S Sigma^+].
std::pair<double, double> mixed_trace_limits(double theta, double gamma, const LimitSpectrum& mu);

}  // namespace confound
