#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "benchnet/tensor.hpp"

namespace benchnet {

struct MetricsTriple {
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double mae = 0.0;
  double mse = 0.0;
  bool r2_defined = false;  // false when the truth vector is constant
};

inline MetricsTriple compute_metrics(const std::vector<double>& pred,
                                     const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ShapeError("compute_metrics: need equal nonzero lengths");
  const std::size_t n = pred.size();
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = truth[i] - pred[i];
    ss_res += d * d;
    abs_sum += std::abs(d);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  MetricsTriple m;
  m.mse = ss_res / static_cast<double>(n);
  m.mae = abs_sum / static_cast<double>(n);
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - ss_res / ss_tot;
    m.r2_defined = true;
  }
  return m;
}

/// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9
/// absolute error, refined by one Halley step).
inline double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("inv_normal_cdf: p must be in (0, 1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace benchnet
