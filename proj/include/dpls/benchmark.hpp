#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpls/io.hpp"
#include "dpls/linear.hpp"
#include "dpls/pipeline.hpp"
#include "dpls/synthetic.hpp"

namespace dpls {

/// 1 - SS_res / SS_tot. Throws DataError on length mismatch, n < 2 or
/// constant `actual`.
double r_squared(const Vector& actual, const Vector& predicted);
double rmse(const Vector& actual, const Vector& predicted);

struct BiasSummary {
  Vector abs_bias;
  double sum = 0.0;
  std::vector<double> cdf_samples;  // abs_bias sorted ascending
};

BiasSummary abs_bias_summary(const Vector& estimated, const Vector& truth);

enum class Method { ols, ridge, lasso, pls, dpls_iv };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct ExperimentConfig {
  std::string dgp = "experiment1";  // or "experiment2"
  SyntheticSpec spec = SyntheticSpec::experiment1();
  std::vector<Method> methods{Method::ols, Method::ridge, Method::lasso, Method::pls,
                              Method::dpls_iv};
  DplsIvConfig dpls;
  IvMode mode = IvMode::control_function;
  double test_fraction = 0.5;
  int replications = 10;
  std::uint64_t base_seed = 1;
  int baseline_folds = 5;
  int lambda_grid = 50;
  int jobs = 1;

  /// Defaults for one of the two simulation designs.
  static ExperimentConfig defaults(std::string_view dgp);
  /// Starts from defaults(experiment.dgp) and applies every key present.
  /// Unknown keys are rejected.
  static ExperimentConfig from_document(const KvDocument& doc);
  KvDocument to_document() const;
  void validate() const;
};

/// A fitted method: treatment model plus outcome model.
///
/// Linear baselines regress y on [p, e_hat, x] with an intercept, where
/// e_hat = p - p_hat comes from `residual_model` when set (the DPLS first stage
/// in the benchmark) and from the method's own treatment fit otherwise.
struct MethodFit {
  Method method = Method::ols;
  LinearFit treatment;  // pls stores its implied coefficients here
  int treatment_q = 0;  // pls only
  LinearFit outcome;
  int outcome_q = 0;  // pls only
  std::optional<DplsModel> residual_model;
  std::optional<DplsIvFit> dpls;

  Vector predict_treatment(const Matrix& zbar) const;
  Vector predict_outcome(const Matrix& zbar, const Vector& p, const Matrix& x) const;
  /// Coefficients of the treatment network on zbar, compared with [alpha, alpha_x].
  Vector treatment_coefficients() const;
  double policy_effect() const;
};

struct MethodSettings {
  int folds = 5;
  int lambda_grid = 50;
  int q_max = 10;
};

/// Fits one method on a training set. For dpls_iv `dpls_cfg` and `mode` apply.
/// `residual_model`, when given, supplies e_hat for linear baselines.
MethodFit fit_method(Method method, const Dataset& train, const DplsIvConfig& dpls_cfg,
                     IvMode mode, const MethodSettings& settings, const SeededRng& rng,
                     const std::optional<DplsModel>& residual_model = std::nullopt);

void write_method_fit(KvDocument& doc, const MethodFit& fit);
MethodFit read_method_fit(const KvDocument& doc);

struct MetricRow {
  std::string method;
  int replication = 0;
  std::string metric;
  double value = 0.0;
};

struct FailureRow {
  std::string method;
  int replication = 0;
  std::string stage;
  std::string message;
};

struct ScatterPoint {
  std::string curve;  // "<method>/treatment" or "<method>/outcome"
  double actual = 0.0;
  double predicted = 0.0;
};

struct ReplicationResult {
  int replication = 0;
  std::uint64_t seed = 0;
  std::vector<MetricRow> metrics;
  std::vector<FailureRow> failures;
  std::map<std::string, Vector> abs_bias;  // per method
  std::vector<ScatterPoint> scatter;       // replication 0 only
};

struct MetricsReport {
  ExperimentConfig config;
  std::vector<ReplicationResult> replications;  // ordered by replication index

  /// Values of one metric for one method, in replication order (failures skipped).
  std::vector<double> values(std::string_view method, std::string_view metric) const;
  /// Same, but indexed by replication; missing entries are nullopt.
  std::vector<std::optional<double>> by_replication(std::string_view method,
                                                    std::string_view metric) const;
  double median(std::string_view method, std::string_view metric) const;
  std::size_t failure_count() const;
  /// True when no method produced a metric in any replication.
  bool all_failed() const;
};

/// The synthetic dataset of the replication with seed `seed`.
SyntheticDraw simulate_replication(const ExperimentConfig& cfg, std::uint64_t seed);

ReplicationResult run_replication(const ExperimentConfig& cfg, int replication);

/// Runs every replication (up to cfg.jobs at once) and merges by index.
MetricsReport run_benchmark(const ExperimentConfig& cfg);

/// metrics.csv, summary.txt, bias_cdf.csv, scatter.csv, seeds.csv,
/// failures.csv and config.resolved.kv.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

std::string format_metrics_csv(const MetricsReport& report);
std::string format_summary(const MetricsReport& report);

}  // namespace dpls
