#include "dpls/iv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpls/dataset.hpp"
#include "dpls/error.hpp"
#include "dpls/linear.hpp"
#include "dpls/stats.hpp"

namespace dpls {
namespace {

constexpr Index kPosteriorChunk = 4096;
constexpr double kJitter = 1e-8;

Matrix symmetrise(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix design_with(const Vector& first, const Matrix& x) {
  if (x.rows() != first.size() && x.cols() > 0) {
    throw DataError("iv: covariates have " + std::to_string(x.rows()) + " rows, expected " +
                    std::to_string(first.size()));
  }
  Matrix d(first.size(), 1 + x.cols());
  d.col(0) = first;
  if (x.cols() > 0) d.rightCols(x.cols()) = x;
  return d;
}

// Inverse of a symmetric PSD matrix, ridged when it is numerically singular.
Matrix guarded_inverse(const Matrix& a, bool& jittered) {
  const Index dim = a.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrise(a));
  const Vector ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  const double bottom = ev.minCoeff();
  Matrix m = symmetrise(a);
  if (!(top > 0.0) || !(bottom > 1e-12 * top)) {
    jittered = true;
    const double trace = m.trace();
    const double ridge = trace > 0.0 ? kJitter * trace / static_cast<double>(dim) : kJitter;
    m.diagonal().array() += ridge;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw SingularError("sandwich: weighting matrix not invertible");
  return symmetrise(ldlt.solve(Eigen::MatrixXd::Identity(dim, dim)));
}

}  // namespace

TobitConstants TobitConstants::identity() {
  TobitConstants c;
  c.psi1 = 1.0;
  c.psi2 = 0.0;
  c.sigma_star = 0.0;
  c.phi_hat = 0.0;
  c.c_k = 1.0;
  return c;
}

TobitConstants estimate_tobit_constants(const Vector& y) {
  const Index n = y.size();
  if (n < 2) throw DataError("estimate_tobit_constants: need at least 2 observations");
  const Vector yc = center(y);
  const double ss = yc.squaredNorm();
  if (!(ss > 0.0)) throw DataError("estimate_tobit_constants: outcome has zero variance");

  TobitConstants c;
  const double positive = static_cast<double>((y.array() > 0.0).count());
  double psi1 = positive / static_cast<double>(n);
  if (psi1 < kPsiClamp || psi1 > 1.0 - kPsiClamp) {
    psi1 = std::clamp(psi1, kPsiClamp, 1.0 - kPsiClamp);
    c.clamped = true;
  }
  const double zq = std_normal_quantile(psi1);
  const double phi = std_normal_pdf(zq);
  c.psi1 = psi1;
  c.phi_hat = phi;
  c.c_k = psi1 - (phi - zq * (1.0 - psi1)) * (phi + zq * psi1);
  if (!(c.c_k > 0.0)) {
    throw NumericalError("estimate_tobit_constants: c(k) is not positive (" +
                         std::to_string(c.c_k) + ")");
  }
  c.sigma_star = std::sqrt(ss / (static_cast<double>(n) * c.c_k));
  c.psi2 = c.sigma_star * c.phi_hat;
  return c;
}

Vector recenter_outcome(const Vector& y, const TobitConstants& c) {
  if (!(c.psi1 > 0.0)) throw DataError("recenter_outcome: psi1 must be positive");
  return (y.array() - c.psi2) / c.psi1;
}

std::string_view to_string(GWeighting weighting) {
  return weighting == GWeighting::inverse_meat ? "inverse_meat" : "experimental_trace_ratio";
}

GWeighting parse_weighting(std::string_view text) {
  if (text == "inverse_meat") return GWeighting::inverse_meat;
  if (text == "experimental_trace_ratio") return GWeighting::experimental_trace_ratio;
  throw DataError("unknown weighting '" + std::string(text) +
                  "' (expected inverse_meat or experimental_trace_ratio)");
}

Vector TobitGmmFit::standard_errors() const {
  if (corrected_cov.size() == 0) throw DataError("standard_errors: sandwich not computed");
  return (corrected_cov.diagonal().array().max(0.0) / static_cast<double>(n())).sqrt();
}

TobitGmmFit gmm_beta(const Vector& p_hat, const Matrix& x, const Vector& y_tilde) {
  return gmm_beta(p_hat, x, y_tilde, p_hat);
}

TobitGmmFit gmm_beta(const Vector& p_hat, const Matrix& x, const Vector& y_tilde,
                     const Vector& p) {
  if (p_hat.size() != y_tilde.size() || p.size() != y_tilde.size()) {
    throw DataError("gmm_beta: p_hat, p and y_tilde must have equal length");
  }
  TobitGmmFit fit;
  fit.design = design_with(p_hat, x);
  fit.y_tilde = y_tilde;
  const LinearFit ls = fit_ols(fit.design, y_tilde, /*fit_intercept=*/false);
  fit.beta = ls.coef;
  const Matrix structural = design_with(p, x);
  fit.residuals = y_tilde - structural * fit.beta;
  return fit;
}

Matrix sandwich_variance(TobitGmmFit& fit, const Matrix& zbar, GWeighting weighting) {
  const Index n = fit.design.rows();
  if (zbar.rows() != n || fit.residuals.size() != n) {
    throw DataError("sandwich_variance: zbar, design and residuals must share rows");
  }
  if (zbar.cols() < fit.design.cols()) {
    throw DataError("sandwich_variance: fewer instruments than regressors");
  }
  const double nd = static_cast<double>(n);
  const Matrix weighted = zbar.array().colwise() * fit.residuals.array().square();
  const Matrix meat = symmetrise(zbar.transpose() * weighted / nd);  // A hat

  bool jittered = false;
  const Matrix h = guarded_inverse(meat, jittered);
  Matrix g = h;
  if (weighting == GWeighting::experimental_trace_ratio) {
    const Matrix ztz = zbar.transpose() * zbar;
    const double ratio_den = (ztz * h).trace();
    if (!(std::abs(ratio_den) > 0.0)) throw SingularError("sandwich: zero trace ratio");
    g = symmetrise(h - h * ztz * h / ratio_den);
  }
  const Matrix ztp = zbar.transpose() * fit.design;
  const Matrix bread = symmetrise(ztp.transpose() * g * ztp);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(bread);
  if (qr.rank() < bread.cols()) throw SingularError("sandwich: P'Z G Z'P is singular");
  const Matrix bread_inv = qr.inverse();
  const Matrix middle = ztp.transpose() * g * (nd * meat) * g * ztp;
  fit.sigma_star = symmetrise(nd * bread_inv * middle * bread_inv);
  const double phi = fit.constants.psi1;
  fit.corrected_cov = psd_project(fit.sigma_star - phi * (1.0 - phi) * fit.beta * fit.beta.transpose());
  fit.jittered = jittered;
  return fit.sigma_star;
}

Matrix psd_project(const Matrix& a) {
  const Matrix s = symmetrise(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if ((eig.eigenvalues().array() >= 0.0).all()) return s;
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  return symmetrise(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
}

ControlFunctionFit control_function_fit(const Vector& p, const Vector& p_hat, const Matrix& x,
                                        const Vector& y) {
  if (p.size() != p_hat.size() || p.size() != y.size()) {
    throw DataError("control_function_fit: p, p_hat and y must have equal length");
  }
  const Vector centred = center(p_hat);
  if (!(centred.squaredNorm() > 0.0)) {
    throw SingularError("control_function_fit: first-stage prediction is constant, so p and "
                        "its residual are collinear");
  }
  ControlFunctionFit fit;
  fit.eta_hat = p - p_hat;
  Matrix design(p.size(), 2 + x.cols());
  design.col(0) = p;
  design.col(1) = fit.eta_hat;
  if (x.cols() > 0) design.rightCols(x.cols()) = x;
  const LinearFit ls = fit_ols(design, y, /*fit_intercept=*/false);
  fit.coef = ls.coef;
  fit.beta = ls.coef(0);
  fit.beta_eta = ls.coef(1);
  fit.beta_x = ls.coef.tail(x.cols());
  return fit;
}

PosteriorDraws sample_posterior(const TobitGmmFit& fit, Index n, Index draws,
                                const SeededRng& rng) {
  if (n < 1) throw DataError("sample_posterior: n must be positive");
  if (draws < 1) throw DataError("sample_posterior: draws must be positive");
  const Index dim = fit.beta.size();
  if (fit.corrected_cov.rows() != dim) {
    throw DataError("sample_posterior: sandwich variance not computed");
  }
  const double nd = static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(psd_project(fit.corrected_cov) / nd);
  const Matrix root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const double psi1 = fit.constants.psi1;
  const double psi_sd = std::sqrt(std::max(0.0, psi1 * (1.0 - psi1)) / nd);

  PosteriorDraws out;
  out.seed = rng.seed();
  out.beta_draws.resize(draws, dim);
  out.psi1_draws.resize(draws);
  Vector normals(dim);
  for (Index start = 0, chunk = 0; start < draws; start += kPosteriorChunk, ++chunk) {
    SeededRng local = rng.derive(static_cast<std::uint64_t>(chunk));
    const Index stop = std::min(draws, start + kPosteriorChunk);
    for (Index i = start; i < stop; ++i) {
      for (Index j = 0; j < dim; ++j) normals(j) = local.normal();
      out.beta_draws.row(i) = (fit.beta + root * normals).transpose();
      const double draw = psi1 + psi_sd * local.normal();
      out.psi1_draws(i) = std::clamp(draw, kPsiClamp, 1.0 - kPsiClamp);
    }
  }
  return out;
}

Matrix posterior_predictive(const PosteriorDraws& draws, const Matrix& design) {
  if (design.cols() != draws.beta_draws.cols()) {
    throw DataError("posterior_predictive: design has " + std::to_string(design.cols()) +
                    " columns, draws have " + std::to_string(draws.beta_draws.cols()));
  }
  return design * draws.beta_draws.transpose();
}

}  // namespace dpls
