#pragma once

#include <string_view>
#include <vector>

#include "dpls/rng.hpp"
#include "dpls/stats.hpp"
#include "dpls/types.hpp"

namespace dpls {

/// Single-response PLS fit of the policy on the augmented instruments.
///
/// Scores are computed from column-centred inputs: T = (zbar - x_means) W.
/// Score columns are mutually orthogonal, and the inner regression of p on T
/// (y_loadings) reproduces the implied coefficients: coef = W * y_loadings.
struct PlsFit {
  Vector coef;
  double intercept = 0.0;
  int q = 0;
  Matrix scores;      // T, n x q
  Matrix x_loadings;  // V, (m+k) x q
  Vector y_loadings;  // inner regression coefficients, length q
  Matrix weights;     // W, (m+k) x q
  Vector x_means;
  double p_mean = 0.0;

  Vector predict(const Matrix& zbar) const;
  Matrix transform(const Matrix& zbar) const;  // scores for new rows
};

/// Krylov sequence s, S s, ..., S^{q-1} s of the sample covariance operator.
///
/// `raw` holds the literal powers. `orthonormal` spans the same space but is
/// built by Arnoldi iteration with re-orthogonalisation, so it stays accurate
/// after the raw powers have become numerically dependent. Arnoldi stops when
/// the new direction falls below 1e-10 relative to ||S||_F; the number of
/// directions found is `effective_rank`.
struct KrylovBasis {
  Matrix raw;
  Matrix orthonormal;
  int effective_rank = 0;
};

KrylovBasis compute_krylov(const CovPair& cov, int q);

enum class PlsAlgorithm { closed_form, deflation };

std::string_view to_string(PlsAlgorithm algorithm);
PlsAlgorithm parse_pls_algorithm(std::string_view text);

/// coef = R (R' S R)^{-1} R' s on the orthonormal Krylov basis.
/// Throws PlsRankError when q exceeds the effective Krylov rank or the
/// projected covariance is singular.
PlsFit fit_pls_closed_form(const Matrix& zbar, const Vector& p, int q);

/// SIMPLS: each weight is the dominant singular direction of the current
/// cross-product, which is then deflated against the orthonormalised
/// x-loadings. Throws PlsRankError (with the achieved count) when the
/// cross-product vanishes before q components.
PlsFit fit_pls_deflation(const Matrix& zbar, const Vector& p, int q);

PlsFit fit_pls(const Matrix& zbar, const Vector& p, int q, PlsAlgorithm algorithm);

struct QSelection {
  int q = 1;
  std::vector<double> cv_error;  // index q-1
};

/// K-fold choice of the component count minimising mean out-of-fold squared
/// error; ties go to the smaller q.
QSelection select_q_cv(const Matrix& zbar, const Vector& p, int q_max, int folds, SeededRng& rng);

}  // namespace dpls
