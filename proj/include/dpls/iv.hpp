#pragma once

#include <string_view>

#include "dpls/rng.hpp"
#include "dpls/types.hpp"

namespace dpls {

/// Recentring constants for a Tobit outcome censored at zero.
/// psi1 doubles as the estimated censoring probability complement (Phi hat).
struct TobitConstants {
  double psi1 = 1.0;
  double psi2 = 0.0;
  double sigma_star = 0.0;
  double phi_hat = 0.0;
  double c_k = 1.0;
  bool clamped = false;  // psi1 was pushed into [1e-6, 1 - 1e-6]

  /// psi1 = 1, psi2 = 0: recentring is the identity and the Tobit
  /// covariance correction vanishes.
  static TobitConstants identity();
};

inline constexpr double kPsiClamp = 1e-6;

/// Throws DataError when y has fewer than 2 entries or zero variance.
TobitConstants estimate_tobit_constants(const Vector& y);

/// (y - psi2) / psi1.
Vector recenter_outcome(const Vector& y, const TobitConstants& c);

/// Weighting matrix used inside the sandwich.
///  inverse_meat: G = A^{-1} (two-step efficient weighting).
///  experimental_trace_ratio: H (H^{-1} - Z'Z / tr(Z'Z H)) H with H = A^{-1},
///  reading the matrix quotient as a scalar trace ratio.
enum class GWeighting { inverse_meat, experimental_trace_ratio };

std::string_view to_string(GWeighting weighting);
GWeighting parse_weighting(std::string_view text);

struct TobitGmmFit {
  Vector beta;  // beta(0) is the policy effect, the rest are covariate effects
  TobitConstants constants;
  Matrix design;       // P bar = [p_hat, x]
  Vector y_tilde;      // recentred outcome
  Vector residuals;    // y_tilde - X beta, X the structural regressors when supplied
  Matrix sigma_star;   // asymptotic covariance of sqrt(n)(beta_hat - beta)
  Matrix corrected_cov;  // PSD projection of sigma_star - Phi(1 - Phi) beta beta'
  bool jittered = false;  // meat matrix needed a ridge before inversion

  double policy_effect() const { return beta(0); }
  Index n() const { return design.rows(); }
  /// sqrt(diag(corrected_cov) / n).
  Vector standard_errors() const;
};

/// Least squares of y_tilde on P bar = [p_hat, x] (no intercept column is
/// added). Residuals use P bar.
TobitGmmFit gmm_beta(const Vector& p_hat, const Matrix& x, const Vector& y_tilde);

/// As above, but residuals are formed with the structural regressors [p, x],
/// which is what the moment condition E[Z e] = 0 refers to.
TobitGmmFit gmm_beta(const Vector& p_hat, const Matrix& x, const Vector& y_tilde, const Vector& p);

/// Fills fit.sigma_star, fit.corrected_cov and fit.jittered; returns sigma_star.
/// A singular meat matrix is ridged by 1e-8 * trace / dim (1e-8 when the
/// trace is zero) for inversion only.
Matrix sandwich_variance(TobitGmmFit& fit, const Matrix& zbar,
                         GWeighting weighting = GWeighting::inverse_meat);

/// Symmetrise and clip negative eigenvalues to zero.
Matrix psd_project(const Matrix& a);

struct ControlFunctionFit {
  double beta = 0.0;
  double beta_eta = 0.0;
  Vector beta_x;
  Vector eta_hat;
  Vector coef;  // [beta, beta_eta, beta_x]
};

/// Least squares of y on [p, p - p_hat, x] without an intercept column.
/// Throws SingularError when p_hat is constant or the design is rank deficient.
ControlFunctionFit control_function_fit(const Vector& p, const Vector& p_hat, const Matrix& x,
                                        const Vector& y);

struct PosteriorDraws {
  Matrix beta_draws;  // draws x dim(beta)
  Vector psi1_draws;
  std::uint64_t seed = 0;
};

/// Draws beta ~ N(beta_hat, corrected_cov / n) and psi1 ~ N(psi1_hat,
/// psi1_hat (1 - psi1_hat) / n), psi1 clamped to (0, 1). Draws are generated
/// in fixed-size chunks, each from its own derived stream.
PosteriorDraws sample_posterior(const TobitGmmFit& fit, Index n, Index draws, const SeededRng& rng);

/// Row-wise design * beta for each draw: returns rows x draws.
Matrix posterior_predictive(const PosteriorDraws& draws, const Matrix& design);

}  // namespace dpls
