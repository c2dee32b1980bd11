#pragma once

#include <string_view>
#include <vector>

#include "dpls/rng.hpp"
#include "dpls/types.hpp"

namespace dpls {

enum class LinearMethod { ols, ridge, lasso };

std::string_view to_string(LinearMethod method);
LinearMethod parse_linear_method(std::string_view text);

struct LinearFit {
  Vector coef;
  double intercept = 0.0;
  LinearMethod method = LinearMethod::ols;
  double lambda = 0.0;

  Vector predict(const Matrix& design) const;
};

/// Least squares via column-pivoted QR. The intercept, when fitted, is
/// handled by centring and is never penalised. Throws SingularError when the
/// (centred) design is rank deficient.
LinearFit fit_ols(const Matrix& design, const Vector& target, bool fit_intercept = true);

/// Minimises ||y - X b||^2 + lambda ||b||^2. lambda = 0 delegates to fit_ols.
LinearFit fit_ridge(const Matrix& design, const Vector& target, double lambda,
                    bool fit_intercept = true);

/// Ridge with lambda minimising generalised cross-validation over a log grid
/// spanning [1e-10, 1e2] times the largest squared singular value of the
/// centred design. Used where a closed-form, fold-free choice is wanted.
LinearFit fit_ridge_gcv(const Matrix& design, const Vector& target, bool fit_intercept = true);

/// Coordinate descent on (1/2n) ||y - X b||^2 + lambda ||b||_1.
///
/// Columns are standardised internally for the sweep, but the penalty is on
/// the original coefficient scale, so the subgradient conditions hold for the
/// design as passed. Stops when a full sweep lowers the objective by at most
/// tol times the null-model objective; throws ConvergenceError (carrying the
/// last iterate) after max_iter sweeps.
LinearFit fit_lasso(const Matrix& design, const Vector& target, double lambda,
                    double tol = 1e-14, int max_iter = 100000, bool fit_intercept = true);

/// Smallest lambda at which the lasso solution is identically zero.
double lasso_lambda_max(const Matrix& design, const Vector& target, bool fit_intercept = true);

/// Geometric grid from `largest` down to largest * ratio, `points` entries.
std::vector<double> log_grid(double largest, int points, double ratio);

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> cv_error;  // mean out-of-fold squared error per grid point
};

/// K-fold cross-validation over a log-spaced penalty grid (ridge or lasso).
/// Ties resolve toward the larger penalty.
LambdaSelection select_lambda_cv(LinearMethod method, const Matrix& design, const Vector& target,
                                 int folds, int grid_points, SeededRng& rng);

/// select_lambda_cv followed by a refit on all rows.
LinearFit fit_penalized_cv(LinearMethod method, const Matrix& design, const Vector& target,
                           int folds, int grid_points, SeededRng& rng);

}  // namespace dpls
