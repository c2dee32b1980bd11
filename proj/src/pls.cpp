#include "dpls/pls.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpls/dataset.hpp"
#include "dpls/error.hpp"

namespace dpls {
namespace {

constexpr double kRankTolerance = 1e-10;

void check_inputs(const Matrix& zbar, const Vector& p, int q, const char* who) {
  if (zbar.rows() != p.size()) {
    throw DataError(std::string(who) + ": zbar has " + std::to_string(zbar.rows()) +
                    " rows, p has " + std::to_string(p.size()));
  }
  if (q < 1 || q > zbar.cols()) {
    throw DataError(std::string(who) + ": q must lie in [1, " + std::to_string(zbar.cols()) +
                    "], got " + std::to_string(q));
  }
}

// Orthogonalise v against the first `count` columns of basis, twice.
void orthogonalise(const Matrix& basis, Index count, Vector& v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Index j = 0; j < count; ++j) v -= basis.col(j).dot(v) * basis.col(j);
  }
}

}  // namespace

std::string_view to_string(PlsAlgorithm algorithm) {
  return algorithm == PlsAlgorithm::closed_form ? "closed_form" : "deflation";
}

PlsAlgorithm parse_pls_algorithm(std::string_view text) {
  if (text == "closed_form") return PlsAlgorithm::closed_form;
  if (text == "deflation") return PlsAlgorithm::deflation;
  throw DataError("unknown PLS algorithm '" + std::string(text) +
                  "' (expected closed_form or deflation)");
}

Vector PlsFit::predict(const Matrix& zbar) const {
  if (zbar.cols() != coef.size()) {
    throw DataError("pls predict: zbar has " + std::to_string(zbar.cols()) +
                    " columns, fit expects " + std::to_string(coef.size()));
  }
  return (zbar * coef).array() + intercept;
}

Matrix PlsFit::transform(const Matrix& zbar) const {
  if (zbar.cols() != weights.rows()) {
    throw DataError("pls transform: column count mismatch");
  }
  return center_columns(zbar, x_means) * weights;
}

KrylovBasis compute_krylov(const CovPair& cov, int q) {
  const Index d = cov.s_zp.size();
  if (q < 1) throw DataError("compute_krylov: q must be at least 1");
  if (cov.s_zz.rows() != d || cov.s_zz.cols() != d) {
    throw DataError("compute_krylov: covariance shapes disagree");
  }
  const double s_norm = cov.s_zp.norm();
  if (s_norm == 0.0) {
    throw NumericalError(
        "compute_krylov: instruments have zero sample covariance with the policy");
  }
  KrylovBasis basis;
  basis.raw.resize(d, q);
  basis.raw.col(0) = cov.s_zp;
  for (int j = 1; j < q; ++j) basis.raw.col(j) = cov.s_zz * basis.raw.col(j - 1);

  Matrix ortho(d, std::min<Index>(q, d));
  ortho.col(0) = cov.s_zp / s_norm;
  int rank = 1;
  const double op_norm = cov.s_zz.norm();
  for (int j = 1; j < q && j < d; ++j) {
    Vector next = cov.s_zz * ortho.col(j - 1);
    orthogonalise(ortho, j, next);
    const double len = next.norm();
    if (!(len > kRankTolerance * op_norm)) break;
    ortho.col(j) = next / len;
    ++rank;
  }
  basis.orthonormal = ortho.leftCols(rank);
  basis.effective_rank = rank;
  return basis;
}

PlsFit fit_pls_closed_form(const Matrix& zbar, const Vector& p, int q) {
  check_inputs(zbar, p, q, "fit_pls_closed_form");
  const CovPair cov = sample_cov_pair(zbar, p);
  const KrylovBasis basis = compute_krylov(cov, q);
  if (basis.effective_rank < q) {
    throw PlsRankError("fit_pls_closed_form: Krylov space has rank " +
                           std::to_string(basis.effective_rank) + " < q = " + std::to_string(q) +
                           "; use a smaller q",
                       basis.effective_rank);
  }
  const Matrix& r = basis.orthonormal;
  const Matrix projected = r.transpose() * cov.s_zz * r;
  Eigen::LLT<Eigen::MatrixXd> chol(projected);
  const double scale = projected.diagonal().maxCoeff();
  if (chol.info() != Eigen::Success || !(scale > 0.0) ||
      chol.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() <
          1e-12 * scale) {
    throw PlsRankError("fit_pls_closed_form: R'SR is singular at q = " + std::to_string(q) +
                           "; use a smaller q",
                       q - 1);
  }
  // W = R L^{-T} makes W' S W = I, so the score columns are orthogonal.
  const Eigen::MatrixXd l_inv_t =
      chol.matrixU().solve(Eigen::MatrixXd::Identity(q, q));
  PlsFit fit;
  fit.q = q;
  fit.weights = r * l_inv_t;
  fit.y_loadings = fit.weights.transpose() * cov.s_zp;
  fit.coef = fit.weights * fit.y_loadings;
  fit.x_loadings = cov.s_zz * fit.weights;
  fit.x_means = column_means(zbar);
  fit.p_mean = mean(p);
  fit.intercept = fit.p_mean - fit.x_means.dot(fit.coef);
  fit.scores = center_columns(zbar, fit.x_means) * fit.weights;
  return fit;
}

PlsFit fit_pls_deflation(const Matrix& zbar, const Vector& p, int q) {
  check_inputs(zbar, p, q, "fit_pls_deflation");
  const Index d = zbar.cols();
  PlsFit fit;
  fit.x_means = column_means(zbar);
  fit.p_mean = mean(p);
  const Matrix zc = center_columns(zbar, fit.x_means);
  const Vector pc = p.array() - fit.p_mean;

  Vector cross = zc.transpose() * pc;
  const double initial = cross.norm();
  Matrix weights(d, q), scores(zc.rows(), q), loadings(d, q), loading_basis(d, q);
  Vector inner(q);
  for (int a = 0; a < q; ++a) {
    const double len = cross.norm();
    if (!(len > kRankTolerance * initial)) {
      throw PlsRankError("fit_pls_deflation: cross-product vanished after " +
                             std::to_string(a) + " of " + std::to_string(q) + " components",
                         a);
    }
    // For a single response the dominant left singular vector of the d x 1
    // cross-product is the normalised vector itself.
    const Vector w = cross / len;
    const Vector t = zc * w;
    const double tt = t.squaredNorm();
    if (!(tt > 0.0)) {
      throw PlsRankError("fit_pls_deflation: zero score at component " + std::to_string(a + 1),
                         a);
    }
    weights.col(a) = w;
    scores.col(a) = t;
    loadings.col(a) = zc.transpose() * t / tt;
    inner(a) = t.dot(pc) / tt;

    Vector u = loadings.col(a);
    orthogonalise(loading_basis, a, u);
    u.normalize();
    loading_basis.col(a) = u;
    cross -= u * u.dot(cross);
  }
  fit.q = q;
  fit.weights = std::move(weights);
  fit.scores = std::move(scores);
  fit.x_loadings = std::move(loadings);
  fit.y_loadings = std::move(inner);
  fit.coef = fit.weights * fit.y_loadings;
  fit.intercept = fit.p_mean - fit.x_means.dot(fit.coef);
  return fit;
}

PlsFit fit_pls(const Matrix& zbar, const Vector& p, int q, PlsAlgorithm algorithm) {
  return algorithm == PlsAlgorithm::closed_form ? fit_pls_closed_form(zbar, p, q)
                                                : fit_pls_deflation(zbar, p, q);
}

QSelection select_q_cv(const Matrix& zbar, const Vector& p, int q_max, int folds,
                       SeededRng& rng) {
  if (q_max < 1 || q_max > zbar.cols()) {
    throw DataError("select_q_cv: q_max must lie in [1, " + std::to_string(zbar.cols()) + "]");
  }
  if (folds < 2) throw DataError("select_q_cv: need at least 2 folds");
  QSelection sel;
  sel.cv_error.assign(static_cast<std::size_t>(q_max), 0.0);
  if (q_max == 1) {
    sel.q = 1;
    return sel;
  }
  const Index n = zbar.rows();
  const std::vector<int> label = fold_assignment(n, folds, rng);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (label[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const Matrix z_train = take_rows(zbar, train);
    const Vector p_train = take_rows(p, train);
    const Matrix z_test = take_rows(zbar, test);
    const Vector p_test = take_rows(p, test);
    for (int q = 1; q <= q_max; ++q) {
      double err;
      try {
        const PlsFit fit = fit_pls_closed_form(z_train, p_train, q);
        err = (p_test - fit.predict(z_test)).squaredNorm() / static_cast<double>(n);
      } catch (const NumericalError&) {
        err = std::numeric_limits<double>::infinity();
      }
      sel.cv_error[static_cast<std::size_t>(q - 1)] += err;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < sel.cv_error.size(); ++i) {
    if (sel.cv_error[i] < sel.cv_error[best]) best = i;
  }
  sel.q = static_cast<int>(best) + 1;
  return sel;
}

}  // namespace dpls
