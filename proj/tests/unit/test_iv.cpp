#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dpls/benchmark.hpp"
#include "dpls/error.hpp"
#include "dpls/iv.hpp"
#include "dpls/linear.hpp"
#include "dpls/pipeline.hpp"
#include "dpls/stats.hpp"
#include "helpers.hpp"

namespace dpls {
namespace {

using testing::random_matrix;
using testing::random_vector;

// Linear IV system: p = z pi + x a + v, y = p beta + x b + u, corr(u, v) = rho.
struct LinearIvDraw {
  Matrix z, x;
  Vector p, y;
};

LinearIvDraw linear_iv(Index n, double beta, double rho, SeededRng& rng) {
  LinearIvDraw d;
  d.z = random_matrix(n, 3, rng);
  d.x = random_matrix(n, 2, rng);
  Vector pi(3);
  pi << 1.0, -0.5, 0.8;
  Vector a(2), b(2);
  a << 0.3, 0.2;
  b << 0.5, -1.0;
  Vector v(n), u(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = rng.normal();
    u(i) = rho * v(i) + std::sqrt(1.0 - rho * rho) * rng.normal();
  }
  d.p = d.z * pi + d.x * a + v;
  d.y = beta * d.p + d.x * b + u;
  return d;
}

Matrix with_column(const Vector& first, const Matrix& rest) {
  Matrix m(first.size(), 1 + rest.cols());
  m.col(0) = first;
  m.rightCols(rest.cols()) = rest;
  return m;
}

TEST(TobitConstants, HandExample) {
  Vector y(4);
  y << 0, 0, 1, 2;
  const TobitConstants c = estimate_tobit_constants(y);
  EXPECT_DOUBLE_EQ(c.psi1, 0.5);
  EXPECT_NEAR(c.phi_hat, 0.398942, 1e-6);
  EXPECT_NEAR(c.c_k, 0.340845, 1e-6);
  const double ss = (y.array() - y.mean()).square().sum();
  EXPECT_NEAR(c.sigma_star, std::sqrt(ss / (4.0 * c.c_k)), 1e-12);
  EXPECT_NEAR(c.psi2, c.sigma_star * c.phi_hat, 1e-12);
  EXPECT_FALSE(c.clamped);
}

TEST(TobitConstants, ClampsAllPositive) {
  Vector y(3);
  y << 1, 2, 3;
  const TobitConstants c = estimate_tobit_constants(y);
  EXPECT_TRUE(c.clamped);
  EXPECT_DOUBLE_EQ(c.psi1, 1.0 - kPsiClamp);
}

TEST(TobitConstants, RejectsDegenerateInput) {
  EXPECT_THROW(estimate_tobit_constants(Vector::Ones(1)), DataError);
  EXPECT_THROW(estimate_tobit_constants(Vector::Constant(5, 2.0)), DataError);
}

TEST(Recenter, Examples) {
  SeededRng rng(1);
  const Vector y = random_vector(10, rng);
  EXPECT_EQ(recenter_outcome(y, TobitConstants::identity()), y);
  TobitConstants c;
  c.psi1 = 0.5;
  c.psi2 = 1.0;
  EXPECT_DOUBLE_EQ(recenter_outcome(Vector::Constant(1, 2.0), c)(0), 2.0);
  const Vector back = c.psi1 * recenter_outcome(y, c).array() + c.psi2;
  EXPECT_LT((back - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GmmBeta, ReducesToOls) {
  SeededRng rng(2);
  const Matrix x = random_matrix(80, 2, rng);
  const Vector p = random_vector(80, rng);
  const Vector y = 1.5 * p + x * Vector::Ones(2) + random_vector(80, rng);
  const TobitGmmFit fit = gmm_beta(p, x, recenter_outcome(y, TobitConstants::identity()));
  const LinearFit ols = fit_ols(with_column(p, x), y, false);
  EXPECT_LT((fit.beta - ols.coef).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GmmBeta, ScalarRatio) {
  Vector p(3), y(3);
  p << 1, 2, 3;
  y << 2, 4, 6;
  const TobitGmmFit fit = gmm_beta(p, Matrix(3, 0), y);
  ASSERT_EQ(fit.beta.size(), 1);
  EXPECT_NEAR(fit.beta(0), 2.0, 1e-12);
}

TEST(GmmBeta, UnbiasedOverReplications) {
  const double beta = 1.2;
  std::vector<double> est;
  for (std::uint64_t r = 0; r < 50; ++r) {
    SeededRng rng(500 + r);
    const LinearIvDraw d = linear_iv(5000, beta, 0.5, rng);
    const Matrix instruments = augment_instruments(d.z, d.x).zbar;
    const Vector p_hat = fit_ols(instruments, d.p).predict(instruments);
    est.push_back(gmm_beta(p_hat, d.x, d.y, d.p).beta(0));
  }
  const Vector e = Eigen::Map<Vector>(est.data(), 50);
  const double se = std::sqrt((e.array() - e.mean()).square().sum() / 49.0 / 50.0);
  EXPECT_LE(std::abs(e.mean() - beta), 3.0 * se);
}

TEST(Sandwich, JustIdentifiedMatchesHc0) {
  SeededRng rng(3);
  const Index n = 300;
  const Matrix x = random_matrix(n, 3, rng);
  Vector noise = random_vector(n, rng);
  noise.array() *= 1.0 + x.col(0).array().abs();  // heteroskedastic
  const Vector y = x * Vector::Ones(3) + noise;
  TobitGmmFit fit = gmm_beta(x.col(0), x.rightCols(2), y);
  fit.constants = TobitConstants::identity();
  sandwich_variance(fit, fit.design);
  const Matrix xtx_inv = (x.transpose() * x).inverse();
  const Vector e = y - x * fit.beta;
  const Matrix meat = x.transpose() * e.array().square().matrix().asDiagonal() * x;
  const Matrix hc0 = static_cast<double>(n) * xtx_inv * meat * xtx_inv;
  EXPECT_LT((fit.sigma_star - hc0).norm() / hc0.norm(), 1e-8);
  EXPECT_LT((fit.corrected_cov - hc0).norm() / hc0.norm(), 1e-8);
  EXPECT_FALSE(fit.jittered);
}

TEST(Sandwich, ZeroResidualsTriggerJitter) {
  SeededRng rng(4);
  const Matrix x = random_matrix(50, 2, rng);
  const Vector y = x * Vector::Ones(2);
  TobitGmmFit fit = gmm_beta(x.col(0), x.rightCols(1), y);
  fit.constants = TobitConstants::identity();
  fit.residuals.setZero();
  sandwich_variance(fit, fit.design);
  EXPECT_TRUE(fit.jittered);
  EXPECT_LT(fit.sigma_star.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sandwich, TobitCorrectionIsPsd) {
  SeededRng rng(5);
  const LinearIvDraw d = linear_iv(400, 2.0, 0.3, rng);
  const Vector y = d.y.cwiseMax(0.0);
  const Matrix zbar = augment_instruments(d.z, d.x).zbar;
  const Vector p_hat = fit_ols(zbar, d.p).predict(zbar);
  const TobitConstants c = estimate_tobit_constants(y);
  TobitGmmFit fit = gmm_beta(p_hat, d.x, recenter_outcome(y, c), d.p);
  fit.constants = c;
  for (GWeighting w : {GWeighting::inverse_meat, GWeighting::experimental_trace_ratio}) {
    sandwich_variance(fit, zbar, w);
    EXPECT_LT((fit.sigma_star - fit.sigma_star.transpose()).norm(), 1e-10 * fit.sigma_star.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.corrected_cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
    EXPECT_TRUE(fit.standard_errors().allFinite());
  }
}

TEST(Sandwich, CoverageOnLinearGaussianDesign) {
  const double beta = 0.8;
  int covered = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    SeededRng rng(700 + r);
    const LinearIvDraw d = linear_iv(1000, beta, 0.5, rng);
    const Matrix zbar = augment_instruments(d.z, d.x).zbar;
    const Vector p_hat = fit_ols(zbar, d.p).predict(zbar);
    TobitGmmFit fit = gmm_beta(p_hat, d.x, d.y, d.p);
    fit.constants = TobitConstants::identity();
    sandwich_variance(fit, zbar);
    covered += std::abs(fit.beta(0) - beta) <= 1.959964 * fit.standard_errors()(0);
  }
  EXPECT_GE(covered, 44);
  EXPECT_LE(covered, 50);
}

TEST(PsdProject, ClipsNegativeEigenvalues) {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;  // eigenvalues 3 and -1
  const Matrix p = psd_project(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
  EXPECT_NEAR(eig.eigenvalues()(0), 0.0, 1e-12);
  EXPECT_NEAR(eig.eigenvalues()(1), 3.0, 1e-12);
  const Matrix id = Matrix::Identity(3, 3);
  EXPECT_EQ(psd_project(id), id);
}

TEST(ControlFunction, IrrelevantControlMatchesOls) {
  SeededRng rng(6);
  const Index n = 200;
  const Matrix x = random_matrix(n, 2, rng);
  const Vector p = random_vector(n, rng);
  const Vector y = 0.7 * p + x * Vector::Ones(2);
  const Matrix base = with_column(p, x);
  Matrix span(n, 4);
  span << base, y;
  Vector eta = random_vector(n, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(span);
  const Matrix q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 4);
  eta -= q * (q.transpose() * eta);
  const ControlFunctionFit cf = control_function_fit(p, p - eta, x, y);
  const LinearFit ols = fit_ols(base, y, false);
  EXPECT_NEAR(cf.beta, ols.coef(0), 1e-8);
  EXPECT_LT((cf.beta_x - ols.coef.tail(2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ControlFunction, BeatsNaiveOlsUnderEndogeneity) {
  const double beta = 1.0;
  int wins = 0;
  for (std::uint64_t r = 0; r < 50; ++r) {
    SeededRng rng(900 + r);
    const LinearIvDraw d = linear_iv(5000, beta, 0.6, rng);
    const Matrix zbar = augment_instruments(d.z, d.x).zbar;
    const Vector p_hat = fit_ols(zbar, d.p).predict(zbar);
    const ControlFunctionFit cf = control_function_fit(d.p, p_hat, d.x, d.y);
    const double naive = fit_ols(with_column(d.p, d.x), d.y).coef(0);
    wins += std::abs(cf.beta - beta) < std::abs(naive - beta);
  }
  EXPECT_GE(wins, 45);
}

TEST(ControlFunction, ExactFirstStageIsCollinear) {
  SeededRng rng(7);
  const Vector p = random_vector(40, rng);
  EXPECT_THROW(control_function_fit(p, p, random_matrix(40, 2, rng), random_vector(40, rng)),
               SingularError);
  EXPECT_THROW(control_function_fit(p, Vector::Constant(40, 1.0), random_matrix(40, 2, rng),
                                    random_vector(40, rng)),
               SingularError);
}

TEST(Posterior, MomentsAndDeterminism) {
  TobitGmmFit fit;
  fit.beta = Vector(3);
  fit.beta << 1.0, -2.0, 0.5;
  fit.design = Matrix::Zero(100, 3);
  fit.constants = TobitConstants::identity();
  fit.corrected_cov = Matrix::Identity(3, 3);
  const SeededRng rng(21);
  const PosteriorDraws draws = sample_posterior(fit, 100, 100000, rng);
  ASSERT_EQ(draws.beta_draws.rows(), 100000);
  const Vector mean = draws.beta_draws.colwise().mean().transpose();
  const Matrix centred = draws.beta_draws.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / 99999.0;
  for (Index j = 0; j < 3; ++j) {
    EXPECT_LE(std::abs(mean(j) - fit.beta(j)), 3.0 * 0.1 / std::sqrt(100000.0));
    EXPECT_NEAR(cov(j, j), 0.01, 0.001);
  }
  const PosteriorDraws again = sample_posterior(fit, 100, 100000, rng);
  EXPECT_EQ(draws.beta_draws, again.beta_draws);
  EXPECT_EQ(draws.psi1_draws, again.psi1_draws);
  EXPECT_TRUE((draws.psi1_draws.array() <= 1.0 - kPsiClamp).all());
}

TEST(Posterior, PredictiveShape) {
  PosteriorDraws d;
  d.beta_draws = Matrix::Ones(5, 2);
  Matrix design(3, 2);
  design << 1, 2, 3, 4, 5, 6;
  const Matrix out = posterior_predictive(d, design);
  EXPECT_EQ(out.rows(), 3);
  EXPECT_EQ(out.cols(), 5);
  EXPECT_DOUBLE_EQ(out(2, 4), 11.0);
  EXPECT_THROW(posterior_predictive(d, Matrix::Ones(3, 3)), DataError);
}

TEST(Weighting, Names) {
  for (GWeighting w : {GWeighting::inverse_meat, GWeighting::experimental_trace_ratio}) {
    EXPECT_EQ(parse_weighting(to_string(w)), w);
  }
  EXPECT_THROW(parse_weighting("identity"), DataError);
}

TEST(Pipeline, ExogenousIdentityLinkMatchesOls) {
  std::vector<double> diff;
  for (std::uint64_t r = 0; r < 20; ++r) {
    SeededRng rng(1100 + r);
    const LinearIvDraw d = linear_iv(600, 1.0, 0.0, rng);
    const Dataset ds(d.y, d.p, d.z, d.x);
    DplsIvConfig cfg;
    cfg.link = OutcomeLink::identity;
    cfg.treatment.activation = ActivationKind::identity();
    cfg.treatment.sgd.seed = r;
    const DplsIvFit fit = dpls_iv_fit(ds, cfg, IvMode::control_function);
    diff.push_back(fit.policy_effect() - fit_ols(with_column(d.p, d.x), d.y).coef(0));
  }
  const Vector e = Eigen::Map<Vector>(diff.data(), 20);
  const double se = std::sqrt((e.array() - e.mean()).square().sum() / 19.0 / 20.0);
  EXPECT_LE(std::abs(e.mean()), 2.0 * se + 1e-12);
}

TEST(Pipeline, ModesAgreeOnExperimentOne) {
  std::vector<double> gaps;
  const ExperimentConfig exp = ExperimentConfig::defaults("experiment1");
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset ds = simulate_replication(exp, seed).data;
    DplsIvConfig cfg = exp.dpls;
    cfg.treatment.sgd.seed = seed;
    const double a = dpls_iv_fit(ds, cfg, IvMode::rescale_gmm).policy_effect();
    const double b = dpls_iv_fit(ds, cfg, IvMode::control_function).policy_effect();
    ASSERT_TRUE(std::isfinite(a) && std::isfinite(b));
    gaps.push_back(std::abs(a - b));
  }
  EXPECT_LE(median(Eigen::Map<Vector>(gaps.data(), 10)), 0.2);
}

TEST(Pipeline, ModeAndLinkNames) {
  for (IvMode m : {IvMode::rescale_gmm, IvMode::control_function}) EXPECT_EQ(parse_iv_mode(to_string(m)), m);
  for (OutcomeLink l : {OutcomeLink::tobit, OutcomeLink::identity}) {
    EXPECT_EQ(parse_outcome_link(to_string(l)), l);
  }
  EXPECT_THROW(parse_iv_mode("2sls"), DataError);
}

}  // namespace
}  // namespace dpls
