#include "dpls/linear.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpls/dataset.hpp"
#include "dpls/error.hpp"
#include "dpls/stats.hpp"

namespace dpls {
namespace {

struct Centred {
  Matrix x;
  Vector y;
  Vector x_means;
  double y_mean = 0.0;
};

Centred centre(const Matrix& design, const Vector& target, bool fit_intercept) {
  if (design.rows() != target.size()) {
    throw DataError("linear fit: design has " + std::to_string(design.rows()) +
                    " rows, target has " + std::to_string(target.size()));
  }
  if (design.rows() < 1) throw DataError("linear fit: empty design");
  Centred c;
  if (fit_intercept) {
    c.x_means = column_means(design);
    c.y_mean = mean(target);
    c.x = center_columns(design, c.x_means);
    c.y = target.array() - c.y_mean;
  } else {
    c.x_means = Vector::Zero(design.cols());
    c.x = design;
    c.y = target;
  }
  return c;
}

double intercept_for(const Centred& c, const Vector& coef) {
  return c.y_mean - c.x_means.dot(coef);
}

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

// Coordinate descent on centred data; coef is a warm start on the original
// scale and is overwritten with the solution.
void lasso_descent(const Matrix& xc, const Vector& yc, double lambda, double tol, int max_iter,
                   Vector& coef) {
  const Index n = xc.rows();
  const Index d = xc.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector scale(d);
  Matrix xs(n, d);
  for (Index j = 0; j < d; ++j) {
    scale(j) = std::sqrt(xc.col(j).squaredNorm() * inv_n);
    xs.col(j) = scale(j) > 0.0 ? Vector(xc.col(j) / scale(j)) : Vector::Zero(n);
  }
  Vector beta(d);  // standardised coefficients
  for (Index j = 0; j < d; ++j) beta(j) = scale(j) > 0.0 ? coef(j) * scale(j) : 0.0;
  Vector resid = yc - xs * beta;

  const double null_objective = 0.5 * inv_n * yc.squaredNorm();
  const double floor = tol * std::max(null_objective, std::numeric_limits<double>::min());
  auto objective = [&] {
    double penalty = 0.0;
    for (Index j = 0; j < d; ++j) {
      if (scale(j) > 0.0) penalty += std::abs(beta(j)) / scale(j);
    }
    return 0.5 * inv_n * resid.squaredNorm() + lambda * penalty;
  };

  double previous = objective();
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    for (Index j = 0; j < d; ++j) {
      if (scale(j) == 0.0) continue;
      const double old = beta(j);
      const double rho = xs.col(j).dot(resid) * inv_n + old;
      const double updated = soft_threshold(rho, lambda / scale(j));
      if (updated != old) {
        resid.noalias() -= (updated - old) * xs.col(j);
        beta(j) = updated;
      }
    }
    const double current = objective();
    if (previous - current <= floor) {
      for (Index j = 0; j < d; ++j) coef(j) = scale(j) > 0.0 ? beta(j) / scale(j) : 0.0;
      return;
    }
    previous = current;
  }
  for (Index j = 0; j < d; ++j) coef(j) = scale(j) > 0.0 ? beta(j) / scale(j) : 0.0;
  throw ConvergenceError("fit_lasso: no convergence after " + std::to_string(max_iter) +
                             " sweeps",
                         coef);
}

Vector ridge_solve(const Matrix& xc, const Vector& yc, double lambda) {
  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += lambda;
  return gram.ldlt().solve(xc.transpose() * yc);
}

}  // namespace

LinearMethod parse_linear_method(std::string_view text) {
  if (text == "ols") return LinearMethod::ols;
  if (text == "ridge") return LinearMethod::ridge;
  if (text == "lasso") return LinearMethod::lasso;
  throw DataError("unknown linear method '" + std::string(text) + "'");
}

std::string_view to_string(LinearMethod method) {
  switch (method) {
    case LinearMethod::ols: return "ols";
    case LinearMethod::ridge: return "ridge";
    case LinearMethod::lasso: return "lasso";
  }
  return "unknown";
}

Vector LinearFit::predict(const Matrix& design) const {
  if (design.cols() != coef.size()) {
    throw DataError("predict: design has " + std::to_string(design.cols()) +
                    " columns, fit expects " + std::to_string(coef.size()));
  }
  return (design * coef).array() + intercept;
}

LinearFit fit_ols(const Matrix& design, const Vector& target, bool fit_intercept) {
  const Centred c = centre(design, target, fit_intercept);
  LinearFit fit;
  fit.method = LinearMethod::ols;
  if (c.x.cols() == 0) {
    fit.coef = Vector::Zero(0);
    fit.intercept = c.y_mean;
    return fit;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.x);
  qr.setThreshold(1e-10);
  if (qr.rank() < c.x.cols()) {
    throw SingularError("fit_ols: design has rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(c.x.cols()) + " columns; use ridge instead");
  }
  fit.coef = qr.solve(c.y);
  fit.intercept = fit_intercept ? intercept_for(c, fit.coef) : 0.0;
  return fit;
}

LinearFit fit_ridge(const Matrix& design, const Vector& target, double lambda,
                    bool fit_intercept) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DataError("fit_ridge: lambda must be a finite non-negative number");
  }
  if (lambda == 0.0) {
    LinearFit fit = fit_ols(design, target, fit_intercept);
    fit.method = LinearMethod::ridge;
    return fit;
  }
  const Centred c = centre(design, target, fit_intercept);
  LinearFit fit;
  fit.method = LinearMethod::ridge;
  fit.lambda = lambda;
  fit.coef = ridge_solve(c.x, c.y, lambda);
  fit.intercept = fit_intercept ? intercept_for(c, fit.coef) : 0.0;
  return fit;
}

LinearFit fit_ridge_gcv(const Matrix& design, const Vector& target, bool fit_intercept) {
  const Centred c = centre(design, target, fit_intercept);
  LinearFit fit;
  fit.method = LinearMethod::ridge;
  const Index n = c.x.rows();
  const Index d = c.x.cols();
  if (d == 0) {
    fit.coef = Vector::Zero(0);
    fit.intercept = c.y_mean;
    return fit;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(c.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  const Vector uty = svd.matrixU().transpose() * c.y;
  const double outside = std::max(0.0, c.y.squaredNorm() - uty.squaredNorm());
  const double top = sv.size() > 0 ? sv(0) * sv(0) : 0.0;
  if (!(top > 0.0)) {
    fit.coef = Vector::Zero(d);
    fit.intercept = fit_intercept ? intercept_for(c, fit.coef) : 0.0;
    return fit;
  }
  const double dof_n = static_cast<double>(n) - (fit_intercept ? 1.0 : 0.0);
  double best_score = std::numeric_limits<double>::infinity();
  double best_lambda = top;
  for (double lambda : log_grid(top * 1e2, 61, 1e-12)) {
    double rss = outside;
    double dof = 0.0;
    for (Index i = 0; i < sv.size(); ++i) {
      const double s2 = sv(i) * sv(i);
      const double shrink = s2 / (s2 + lambda);
      dof += shrink;
      const double r = (1.0 - shrink) * uty(i);
      rss += r * r;
    }
    const double denom = dof_n - dof;
    if (!(denom > 0.0)) continue;
    const double score = rss / (denom * denom);
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  Vector shrunk(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    shrunk(i) = sv(i) > 0.0 ? sv(i) / (sv(i) * sv(i) + best_lambda) * uty(i) : 0.0;
  }
  fit.lambda = best_lambda;
  fit.coef = svd.matrixV() * shrunk;
  fit.intercept = fit_intercept ? intercept_for(c, fit.coef) : 0.0;
  return fit;
}

LinearFit fit_lasso(const Matrix& design, const Vector& target, double lambda, double tol,
                    int max_iter, bool fit_intercept) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DataError("fit_lasso: lambda must be a finite non-negative number");
  }
  if (max_iter < 1) throw DataError("fit_lasso: max_iter must be positive");
  const Centred c = centre(design, target, fit_intercept);
  LinearFit fit;
  fit.method = LinearMethod::lasso;
  fit.lambda = lambda;
  fit.coef = Vector::Zero(design.cols());
  lasso_descent(c.x, c.y, lambda, tol, max_iter, fit.coef);
  fit.intercept = fit_intercept ? intercept_for(c, fit.coef) : 0.0;
  return fit;
}

double lasso_lambda_max(const Matrix& design, const Vector& target, bool fit_intercept) {
  const Centred c = centre(design, target, fit_intercept);
  if (c.x.cols() == 0) return 0.0;
  return (c.x.transpose() * c.y).cwiseAbs().maxCoeff() / static_cast<double>(c.x.rows());
}

std::vector<double> log_grid(double largest, int points, double ratio) {
  if (points < 1) throw DataError("log_grid: need at least one point");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    grid[static_cast<std::size_t>(i)] = largest * std::pow(ratio, t);
  }
  return grid;
}

LambdaSelection select_lambda_cv(LinearMethod method, const Matrix& design, const Vector& target,
                                 int folds, int grid_points, SeededRng& rng) {
  if (method == LinearMethod::ols) throw DataError("select_lambda_cv: OLS has no penalty");
  const Index n = design.rows();
  const std::vector<int> label = fold_assignment(n, folds, rng);

  LambdaSelection sel;
  if (method == LinearMethod::lasso) {
    const double top = lasso_lambda_max(design, target);
    sel.grid = log_grid(top > 0.0 ? top : 1.0, grid_points, 1e-3);
  } else {
    const Matrix xc = center_columns(design);
    const double top = xc.squaredNorm();
    sel.grid = log_grid(top > 0.0 ? top : 1.0, grid_points, 1e-7);
  }
  sel.cv_error.assign(sel.grid.size(), 0.0);

  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (label[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const Matrix x_train = take_rows(design, train);
    const Vector y_train = take_rows(target, train);
    const Matrix x_test = take_rows(design, test);
    const Vector y_test = take_rows(target, test);
    const Centred c = centre(x_train, y_train, true);
    Vector coef = Vector::Zero(design.cols());
    for (std::size_t g = 0; g < sel.grid.size(); ++g) {
      if (method == LinearMethod::lasso) {
        try {
          lasso_descent(c.x, c.y, sel.grid[g], 1e-10, 10000, coef);
        } catch (const ConvergenceError& e) {
          coef = e.last_iterate();
        }
      } else {
        coef = ridge_solve(c.x, c.y, sel.grid[g]);
      }
      const Vector pred = (x_test * coef).array() + intercept_for(c, coef);
      sel.cv_error[g] += (y_test - pred).squaredNorm() / static_cast<double>(n);
    }
  }
  // Grid runs from strongest to weakest penalty; strict '<' keeps the larger
  // penalty on ties.
  std::size_t best = 0;
  for (std::size_t g = 1; g < sel.grid.size(); ++g) {
    if (sel.cv_error[g] < sel.cv_error[best]) best = g;
  }
  sel.lambda = sel.grid[best];
  return sel;
}

LinearFit fit_penalized_cv(LinearMethod method, const Matrix& design, const Vector& target,
                           int folds, int grid_points, SeededRng& rng) {
  const LambdaSelection sel = select_lambda_cv(method, design, target, folds, grid_points, rng);
  if (method == LinearMethod::lasso) {
    return fit_lasso(design, target, sel.lambda, 1e-12, 100000, true);
  }
  return fit_ridge(design, target, sel.lambda, true);
}

}  // namespace dpls
