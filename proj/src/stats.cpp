#include "dpls/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dpls/error.hpp"

namespace dpls {
namespace {

template <typename Derived>
double exact_mean(const Eigen::MatrixBase<Derived>& v) {
  const Index n = v.size();
  if (n == 0) return 0.0;
  if ((v.array() == v(0)).all()) return v(0);
  double m = v.sum() / static_cast<double>(n);
  // Second pass corrects the rounding error of the first.
  m += (v.array() - m).sum() / static_cast<double>(n);
  return m;
}

}  // namespace

double mean(const Vector& v) { return exact_mean(v); }

Vector column_means(const Matrix& a) {
  Vector out(a.cols());
  for (Index j = 0; j < a.cols(); ++j) out(j) = exact_mean(a.col(j));
  return out;
}

Matrix center_columns(const Matrix& a, const Vector& means) {
  return a.rowwise() - means.transpose();
}

Matrix center_columns(const Matrix& a) { return center_columns(a, column_means(a)); }

Vector center(const Vector& v) { return v.array() - exact_mean(v); }

CovPair sample_cov_pair(const Matrix& zbar, const Vector& p) {
  if (zbar.rows() != p.size()) {
    throw DataError("sample_cov_pair: zbar has " + std::to_string(zbar.rows()) +
                    " rows, p has " + std::to_string(p.size()));
  }
  const Index n = zbar.rows();
  if (n < 2) throw DataError("sample_cov_pair: need at least 2 rows");
  const Matrix zc = center_columns(zbar);
  const Vector pc = center(p);
  const double denom = static_cast<double>(n - 1);
  Matrix s_zz = (zc.transpose() * zc) / denom;
  s_zz = 0.5 * (s_zz + s_zz.transpose()).eval();
  Vector s_zp = (zc.transpose() * pc) / denom;
  return {std::move(s_zz), std::move(s_zp)};
}

double std_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

// Acklam's rational approximation followed by one Halley step.
double std_normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) {
    throw DataError("std_normal_quantile: argument must lie strictly inside (0, 1)");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (u < low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - low) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Work on the smaller tail so the residual does not cancel near u = 1.
  const double e = (u > 0.5) ? (1.0 - u) - std_normal_cdf(-x) : std_normal_cdf(x) - u;
  const double step = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= step / (1.0 + 0.5 * x * step);
  return x;
}

double quantile(Vector values, double prob) {
  if (values.size() == 0) throw DataError("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min<Index>(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values(lo) + frac * (values(hi) - values(lo));
}

double median(const Vector& values) { return quantile(values, 0.5); }

}  // namespace dpls
