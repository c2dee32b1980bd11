#include <gtest/gtest.h>

#include <filesystem>

#include "dpls/benchmark.hpp"
#include "dpls/error.hpp"
#include "helpers.hpp"

namespace dpls {
namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dpls_unit_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg = ExperimentConfig::defaults("experiment1");
  cfg.spec.n = 300;
  cfg.spec.m = 10;
  cfg.spec.m_redundant = 2;
  cfg.spec.k = 5;
  cfg.spec.k_null = 3;
  cfg.replications = 2;
  cfg.dpls.treatment.hidden_widths = {6, 4};
  cfg.dpls.treatment.sgd.epochs = 10;
  cfg.lambda_grid = 10;
  return cfg;
}

TEST(Metrics, RSquaredAndRmse) {
  Vector a(4);
  a << 1, 2, 3, 5;
  EXPECT_DOUBLE_EQ(r_squared(a, a), 1.0);
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_NEAR(r_squared(a, Vector::Constant(4, a.mean())), 0.0, 1e-15);
  Vector b(2), c(2);
  b << 0, 2;
  c << 1, 1;
  EXPECT_DOUBLE_EQ(rmse(b, c), 1.0);
  EXPECT_THROW(r_squared(Vector::Ones(3), Vector::Ones(3)), DataError);
  EXPECT_THROW(rmse(Vector::Ones(1), Vector::Ones(1)), DataError);
  EXPECT_THROW(rmse(Vector::Ones(2), Vector::Ones(3)), DataError);
}

TEST(Metrics, SymmetricUnderRowPermutation) {
  SeededRng rng(1);
  const Vector a = testing::random_vector(50, rng);
  const Vector p = testing::random_vector(50, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(50);
  perm.setIdentity();
  std::vector<int> idx(perm.indices().data(), perm.indices().data() + 50);
  rng.shuffle(std::span<int>(idx));
  for (int i = 0; i < 50; ++i) perm.indices()(i) = idx[static_cast<std::size_t>(i)];
  EXPECT_NEAR(r_squared(perm * a, perm * p), r_squared(a, p), 1e-14);
  EXPECT_NEAR(rmse(perm * a, perm * p), rmse(a, p), 1e-14);
}

TEST(BiasSummary, Examples) {
  SeededRng rng(2);
  const Vector t = testing::random_vector(5, rng);
  const BiasSummary zero = abs_bias_summary(t, t);
  EXPECT_EQ(zero.sum, 0.0);
  EXPECT_EQ(zero.abs_bias, Vector::Zero(5));
  const BiasSummary shifted = abs_bias_summary(t.array() + 1.0, t);
  EXPECT_NEAR(shifted.sum, 5.0, 1e-12);
  EXPECT_TRUE(std::is_sorted(shifted.cdf_samples.begin(), shifted.cdf_samples.end()));
  EXPECT_THROW(abs_bias_summary(t, Vector::Zero(4)), DataError);
}

TEST(ExperimentConfig, DocumentRoundTrip) {
  ExperimentConfig cfg = small_config();
  cfg.spec.coefficient_seed = 12;
  cfg.methods = {Method::pls, Method::dpls_iv};
  cfg.mode = IvMode::rescale_gmm;
  const KvDocument doc = cfg.to_document();
  const ExperimentConfig back = ExperimentConfig::from_document(KvDocument::parse(doc.to_string()));
  EXPECT_EQ(back.to_document().to_string(), doc.to_string());
  EXPECT_EQ(back.spec.coefficient_seed, std::optional<std::uint64_t>(12));
  EXPECT_EQ(back.methods.size(), 2u);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ExperimentConfig::from_document(KvDocument::parse("experiment.replicatoins = 3\n")),
               DataError);
  EXPECT_THROW(ExperimentConfig::from_document(KvDocument::parse("experiment.replications = 0\n")),
               DataError);
  EXPECT_THROW(ExperimentConfig::from_document(KvDocument::parse("experiment.methods = ols, svm\n")),
               DataError);
  EXPECT_THROW(ExperimentConfig::from_document(KvDocument::parse("experiment.dgp = experiment3\n")),
               DataError);
  const ExperimentConfig two =
      ExperimentConfig::from_document(KvDocument::parse("experiment.dgp = experiment2\n"));
  EXPECT_EQ(two.spec.covariance, CovarianceMode::network);
  EXPECT_EQ(two.dpls.treatment.hidden_widths, (std::vector<int>{200, 200, 100, 50}));
  EXPECT_EQ(ExperimentConfig{}.test_fraction, 0.5);
}

TEST(RunBenchmark, NoiselessLinearOlsIsExact) {
  ExperimentConfig cfg = small_config();
  cfg.replications = 1;
  cfg.methods = {Method::ols};
  cfg.spec.sigma_joint = Matrix::Zero(2, 2);
  cfg.spec.sigma_eps = 0.0;
  cfg.spec.activation_g = ActivationKind::identity();
  cfg.spec.activation_f = ActivationKind::identity();
  const MetricsReport report = run_benchmark(cfg);
  ASSERT_EQ(report.failure_count(), 0u);
  EXPECT_NEAR(report.median("ols", "outcome_r2"), 1.0, 1e-8);
}

TEST(RunBenchmark, ByteIdenticalReportsAndJobIndependence) {
  ExperimentConfig cfg = small_config();
  const auto a = scratch_dir("bench_a"), b = scratch_dir("bench_b");
  write_report(run_benchmark(cfg), a);
  write_report(run_benchmark(cfg), b);
  for (const char* f : {"metrics.csv", "summary.txt", "config.resolved.kv", "seeds.csv",
                        "failures.csv", "bias_cdf.csv", "scatter.csv"}) {
    EXPECT_EQ(read_text(a / f), read_text(b / f)) << f;
  }
  cfg.jobs = 2;
  EXPECT_EQ(format_metrics_csv(run_benchmark(cfg)), read_text(a / "metrics.csv"));
}

TEST(RunBenchmark, SeedLedgerAndMetricColumns) {
  ExperimentConfig cfg = small_config();
  cfg.base_seed = 40;
  const MetricsReport report = run_benchmark(cfg);
  ASSERT_EQ(report.replications.size(), 2u);
  EXPECT_EQ(report.replications[0].seed, 40u);
  EXPECT_EQ(report.replications[1].seed, 41u);
  const std::string csv = format_metrics_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,replication,metric,value");
  for (const auto& rep : report.replications) {
    for (const MetricRow& row : rep.metrics) {
      if (row.metric.ends_with("_r2")) {
        EXPECT_LE(row.value, 1.0);
      }
      if (row.metric.ends_with("_rmse")) {
        EXPECT_GE(row.value, 0.0);
      }
    }
  }
}

TEST(RunBenchmark, FailuresAreRecordedNotThrown) {
  ExperimentConfig cfg = small_config();
  cfg.spec.n = 24;  // halves of 12 rows cannot support 15 regressors
  const MetricsReport report = run_benchmark(cfg);
  EXPECT_TRUE(report.all_failed());
  EXPECT_EQ(report.failure_count(), 2u);
  EXPECT_EQ(report.replications[0].failures[0].stage, "data");
}

TEST(MethodNames, RoundTrip) {
  for (Method m : {Method::ols, Method::ridge, Method::lasso, Method::pls, Method::dpls_iv}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("deepiv"), DataError);
}

}  // namespace
}  // namespace dpls
