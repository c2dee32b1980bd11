#pragma once

#include "dpls/types.hpp"

namespace dpls {

/// Sample covariance of the augmented instruments and their covariance with
/// the policy, both with the 1/(n-1) normalisation.
struct CovPair {
  Matrix s_zz;
  Vector s_zp;
};

Vector column_means(const Matrix& a);
double mean(const Vector& v);

/// Subtracts exact (two-pass) column means. A constant column centres to
/// exactly zero.
Matrix center_columns(const Matrix& a, const Vector& means);
Matrix center_columns(const Matrix& a);
Vector center(const Vector& v);

CovPair sample_cov_pair(const Matrix& zbar, const Vector& p);

double std_normal_pdf(double t);
double std_normal_cdf(double t);
/// Inverse of std_normal_cdf on (0, 1). Throws DataError at or outside the
/// endpoints.
double std_normal_quantile(double u);

/// Sample median and quantile with linear interpolation between order
/// statistics (type 7).
double quantile(Vector values, double prob);
double median(const Vector& values);

}  // namespace dpls
