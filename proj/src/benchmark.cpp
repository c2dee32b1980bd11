#include "dpls/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <cstdio>
#include <limits>
#include <thread>

#include "dpls/error.hpp"
#include "dpls/pls.hpp"
#include "dpls/serialize.hpp"
#include "dpls/stats.hpp"

namespace dpls {
namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kMethodStreamBase = 10;

const std::vector<std::string> kMetricOrder{"treatment_r2", "treatment_rmse", "outcome_r2",
                                            "outcome_rmse", "bias_sum",       "policy_effect"};

void check_lengths(const Vector& a, const Vector& b, const char* who) {
  if (a.size() != b.size()) {
    throw DataError(std::string(who) + ": lengths differ (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw DataError(std::string(who) + ": need at least 2 values");
}

// PLS fit (q chosen by cross-validation) expressed as a linear fit.
LinearFit pls_as_linear(const Matrix& design, const Vector& target, const MethodSettings& s,
                        SeededRng& rng, int& q_out) {
  const int q_max = std::min<int>(s.q_max, static_cast<int>(design.cols()));
  const int q = select_q_cv(design, target, q_max, s.folds, rng).q;
  const PlsFit pls = fit_pls_closed_form(design, target, q);
  q_out = q;
  LinearFit fit;
  fit.coef = pls.coef;
  fit.intercept = pls.intercept;
  return fit;
}

LinearFit fit_linear_method(Method method, const Matrix& design, const Vector& target,
                            const MethodSettings& s, SeededRng& rng, int& q_out) {
  switch (method) {
    case Method::ols: return fit_ols(design, target);
    case Method::ridge:
      return fit_penalized_cv(LinearMethod::ridge, design, target, s.folds, s.lambda_grid, rng);
    case Method::lasso:
      return fit_penalized_cv(LinearMethod::lasso, design, target, s.folds, s.lambda_grid, rng);
    case Method::pls: return pls_as_linear(design, target, s, rng, q_out);
    case Method::dpls_iv: break;
  }
  throw DataError("fit_linear_method: dpls_iv is not a linear method");
}

Matrix outcome_design(const Vector& p, const Vector& p_hat, const Matrix& x) {
  Matrix pe(p.size(), 2);
  pe.col(0) = p;
  pe.col(1) = p - p_hat;
  return hcat(pe, x);
}

std::string parse_optional_seed_text(const std::optional<std::uint64_t>& seed) {
  return seed ? std::to_string(*seed) : std::string("none");
}

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double quantile_of(const std::vector<double>& v, double prob) {
  Vector tmp(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) tmp(static_cast<Index>(i)) = v[i];
  return quantile(tmp, prob);
}

}  // namespace

double r_squared(const Vector& actual, const Vector& predicted) {
  check_lengths(actual, predicted, "r_squared");
  const double total = center(actual).squaredNorm();
  if (!(total > 0.0)) throw DataError("r_squared: actual values are constant");
  return 1.0 - (actual - predicted).squaredNorm() / total;
}

double rmse(const Vector& actual, const Vector& predicted) {
  check_lengths(actual, predicted, "rmse");
  return std::sqrt((actual - predicted).squaredNorm() / static_cast<double>(actual.size()));
}

BiasSummary abs_bias_summary(const Vector& estimated, const Vector& truth) {
  if (estimated.size() != truth.size()) {
    throw DataError("abs_bias_summary: estimated has " + std::to_string(estimated.size()) +
                    " entries, truth has " + std::to_string(truth.size()));
  }
  BiasSummary s;
  s.abs_bias = (estimated - truth).cwiseAbs();
  s.sum = s.abs_bias.sum();
  s.cdf_samples.assign(s.abs_bias.data(), s.abs_bias.data() + s.abs_bias.size());
  std::sort(s.cdf_samples.begin(), s.cdf_samples.end());
  return s;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ols: return "ols";
    case Method::ridge: return "ridge";
    case Method::lasso: return "lasso";
    case Method::pls: return "pls";
    case Method::dpls_iv: return "dpls_iv";
  }
  return "ols";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::ols, Method::ridge, Method::lasso, Method::pls, Method::dpls_iv}) {
    if (text == to_string(m)) return m;
  }
  throw DataError("unknown method '" + std::string(text) +
                  "' (expected ols, ridge, lasso, pls or dpls_iv)");
}

ExperimentConfig ExperimentConfig::defaults(std::string_view dgp) {
  ExperimentConfig cfg;
  if (dgp == "experiment1") {
    cfg.dgp = "experiment1";
    cfg.spec = SyntheticSpec::experiment1();
    cfg.dpls.treatment.hidden_widths = {50, 30};
  } else if (dgp == "experiment2") {
    cfg.dgp = "experiment2";
    cfg.spec = SyntheticSpec::experiment2();
    cfg.dpls.treatment.hidden_widths = {200, 200, 100, 50};
  } else {
    throw DataError("unknown dgp '" + std::string(dgp) + "' (expected experiment1 or experiment2)");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_document(const KvDocument& doc) {
  ExperimentConfig cfg = defaults(doc.get_string("experiment.dgp", "experiment1"));
  cfg.replications = static_cast<int>(doc.get_integer("experiment.replications", cfg.replications));
  cfg.base_seed = static_cast<std::uint64_t>(
      doc.get_integer("experiment.base_seed", static_cast<long long>(cfg.base_seed)));
  cfg.test_fraction = doc.get_double("experiment.test_fraction", cfg.test_fraction);
  cfg.jobs = static_cast<int>(doc.get_integer("experiment.jobs", cfg.jobs));
  if (doc.contains("experiment.methods")) {
    cfg.methods.clear();
    for (const std::string& m : doc.get_list("experiment.methods")) cfg.methods.push_back(parse_method(m));
  }

  SyntheticSpec& s = cfg.spec;
  s.n = doc.get_integer("synthetic.n", s.n);
  s.m = doc.get_integer("synthetic.m", s.m);
  s.m_redundant = doc.get_integer("synthetic.m_redundant", s.m_redundant);
  s.k = doc.get_integer("synthetic.k", s.k);
  s.k_null = doc.get_integer("synthetic.k_null", s.k_null);
  if (doc.contains("synthetic.sigma_joint")) {
    const Vector v = doc.get_vector("synthetic.sigma_joint");
    if (v.size() != 4) throw DataError("synthetic.sigma_joint must have 4 entries (row-major 2 x 2)");
    s.sigma_joint.resize(2, 2);
    s.sigma_joint << v(0), v(1), v(2), v(3);
  }
  s.sigma_eps = doc.get_double("synthetic.sigma_eps", s.sigma_eps);
  if (doc.contains("synthetic.activation_g")) {
    s.activation_g = ActivationKind::parse(doc.get_string("synthetic.activation_g"));
  }
  if (doc.contains("synthetic.activation_f")) {
    s.activation_f = ActivationKind::parse(doc.get_string("synthetic.activation_f"));
  }
  if (doc.contains("synthetic.coefficient_seed")) {
    const std::string& v = doc.get_string("synthetic.coefficient_seed");
    if (v == "none") {
      s.coefficient_seed.reset();
    } else {
      s.coefficient_seed =
          static_cast<std::uint64_t>(parse_integer(v, "synthetic.coefficient_seed"));
    }
  }
  s.near_diagonal_c = doc.get_double("synthetic.near_diagonal_c", s.near_diagonal_c);
  s.network_base = doc.get_double("synthetic.network_base", s.network_base);
  s.edges_per_node = doc.get_integer("synthetic.edges_per_node", s.edges_per_node);

  DplsConfig& d = cfg.dpls.treatment;
  if (doc.contains("dpls.hidden_widths")) {
    const Vector widths = doc.get_vector("dpls.hidden_widths");
    d.hidden_widths.clear();
    for (Index i = 0; i < widths.size(); ++i) {
      if (widths(i) != std::floor(widths(i))) throw DataError("dpls.hidden_widths must be integers");
      d.hidden_widths.push_back(static_cast<int>(widths(i)));
    }
  }
  if (doc.contains("dpls.activation")) d.activation = ActivationKind::parse(doc.get_string("dpls.activation"));
  if (doc.contains("dpls.q")) {
    const std::string& q = doc.get_string("dpls.q");
    if (q == "auto") {
      d.first_layer_q.reset();
    } else {
      d.first_layer_q = static_cast<int>(parse_integer(q, "dpls.q"));
    }
  }
  d.q_max = static_cast<int>(doc.get_integer("dpls.q_max", d.q_max));
  d.cv_folds = static_cast<int>(doc.get_integer("dpls.cv_folds", d.cv_folds));
  if (doc.contains("dpls.first_layer_algorithm")) {
    d.first_layer_algorithm = parse_pls_algorithm(doc.get_string("dpls.first_layer_algorithm"));
  }
  if (doc.contains("dpls.second_layer_method")) {
    d.second_layer_method = parse_init_method(doc.get_string("dpls.second_layer_method"));
  }
  d.use_bias = doc.get_bool("dpls.use_bias", d.use_bias);
  d.linear_output = doc.get_bool("dpls.linear_output", d.linear_output);
  d.sgd.learning_rate = doc.get_double("dpls.sgd.learning_rate", d.sgd.learning_rate);
  d.sgd.batch_size = static_cast<int>(doc.get_integer("dpls.sgd.batch_size", d.sgd.batch_size));
  d.sgd.epochs = static_cast<int>(doc.get_integer("dpls.sgd.epochs", d.sgd.epochs));
  d.sgd.seed = static_cast<std::uint64_t>(
      doc.get_integer("dpls.sgd.seed", static_cast<long long>(d.sgd.seed)));

  if (doc.contains("iv.mode")) cfg.mode = parse_iv_mode(doc.get_string("iv.mode"));
  if (doc.contains("iv.link")) cfg.dpls.link = parse_outcome_link(doc.get_string("iv.link"));
  if (doc.contains("iv.weighting")) cfg.dpls.weighting = parse_weighting(doc.get_string("iv.weighting"));

  cfg.baseline_folds = static_cast<int>(doc.get_integer("baseline.cv_folds", cfg.baseline_folds));
  cfg.lambda_grid = static_cast<int>(doc.get_integer("baseline.lambda_grid", cfg.lambda_grid));

  const auto unread = doc.unread_keys();
  if (!unread.empty()) {
    std::string list;
    for (const auto& k : unread) list += (list.empty() ? "" : ", ") + k;
    throw DataError("unknown configuration keys: " + list);
  }
  cfg.validate();
  return cfg;
}

KvDocument ExperimentConfig::to_document() const {
  KvDocument doc;
  doc.set("experiment.dgp", dgp);
  doc.set("experiment.replications", replications);
  doc.set("experiment.base_seed", static_cast<long long>(base_seed));
  doc.set("experiment.test_fraction", test_fraction);
  doc.set("experiment.jobs", jobs);
  std::string methods_text;
  for (Method m : methods) methods_text += (methods_text.empty() ? "" : ", ") + std::string(to_string(m));
  doc.set("experiment.methods", methods_text);

  doc.set("synthetic.n", static_cast<long long>(spec.n));
  doc.set("synthetic.m", static_cast<long long>(spec.m));
  doc.set("synthetic.m_redundant", static_cast<long long>(spec.m_redundant));
  doc.set("synthetic.k", static_cast<long long>(spec.k));
  doc.set("synthetic.k_null", static_cast<long long>(spec.k_null));
  doc.set("synthetic.sigma_joint", std::vector<double>{spec.sigma_joint(0, 0), spec.sigma_joint(0, 1),
                                                       spec.sigma_joint(1, 0), spec.sigma_joint(1, 1)});
  doc.set("synthetic.sigma_eps", spec.sigma_eps);
  doc.set("synthetic.activation_g", spec.activation_g.name());
  doc.set("synthetic.activation_f", spec.activation_f.name());
  doc.set("synthetic.coefficient_seed", parse_optional_seed_text(spec.coefficient_seed));
  doc.set("synthetic.near_diagonal_c", spec.near_diagonal_c);
  doc.set("synthetic.network_base", spec.network_base);
  doc.set("synthetic.edges_per_node", static_cast<long long>(spec.edges_per_node));

  const DplsConfig& d = dpls.treatment;
  doc.set("dpls.hidden_widths", d.hidden_widths);
  doc.set("dpls.activation", d.activation.name());
  doc.set("dpls.q", d.first_layer_q ? std::to_string(*d.first_layer_q) : std::string("auto"));
  doc.set("dpls.q_max", d.q_max);
  doc.set("dpls.cv_folds", d.cv_folds);
  doc.set("dpls.first_layer_algorithm", std::string(to_string(d.first_layer_algorithm)));
  doc.set("dpls.second_layer_method", std::string(to_string(d.second_layer_method)));
  doc.set("dpls.use_bias", d.use_bias);
  doc.set("dpls.linear_output", d.linear_output);
  doc.set("dpls.sgd.learning_rate", d.sgd.learning_rate);
  doc.set("dpls.sgd.batch_size", d.sgd.batch_size);
  doc.set("dpls.sgd.epochs", d.sgd.epochs);
  doc.set("dpls.sgd.seed", static_cast<long long>(d.sgd.seed));
  doc.set("iv.mode", std::string(to_string(mode)));
  doc.set("iv.link", std::string(to_string(dpls.link)));
  doc.set("iv.weighting", std::string(to_string(dpls.weighting)));
  doc.set("baseline.cv_folds", baseline_folds);
  doc.set("baseline.lambda_grid", lambda_grid);
  return doc;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw DataError("config: at least one method is required");
  if (replications < 1) throw DataError("config: replications must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("config: test_fraction must lie in (0, 1)");
  }
  if (jobs < 1) throw DataError("config: jobs must be at least 1");
  if (baseline_folds < 2) throw DataError("config: baseline.cv_folds must be at least 2");
  if (lambda_grid < 2) throw DataError("config: baseline.lambda_grid must be at least 2");
  const DplsConfig& d = dpls.treatment;
  if (d.q_max < 1) throw DataError("config: dpls.q_max must be positive");
  if (d.cv_folds < 2) throw DataError("config: dpls.cv_folds must be at least 2");
  for (int w : d.hidden_widths) {
    if (w < 1) throw DataError("config: dpls.hidden_widths entries must be positive");
  }
  if (d.sgd.batch_size < 1 || d.sgd.epochs < 0 || !(d.sgd.learning_rate >= 0.0)) {
    throw DataError("config: invalid dpls.sgd settings");
  }
  spec.validate();
}

Vector MethodFit::predict_treatment(const Matrix& zbar) const {
  if (dpls) return dpls->predict_treatment(zbar);
  return treatment.predict(zbar);
}

Vector MethodFit::predict_outcome(const Matrix& zbar, const Vector& p, const Matrix& x) const {
  if (dpls) return dpls->predict_outcome(zbar, p, x);
  const Vector p_hat = residual_model ? dpls_predict(*residual_model, zbar) : treatment.predict(zbar);
  return outcome.predict(outcome_design(p, p_hat, x));
}

Vector MethodFit::treatment_coefficients() const {
  if (dpls) return dpls->treatment.first_layer.coef;
  return treatment.coef;
}

double MethodFit::policy_effect() const {
  if (dpls) return dpls->policy_effect();
  return outcome.coef(0);
}

MethodFit fit_method(Method method, const Dataset& train, const DplsIvConfig& dpls_cfg,
                     IvMode mode, const MethodSettings& settings, const SeededRng& rng,
                     const std::optional<DplsModel>& residual_model) {
  MethodFit fit;
  fit.method = method;
  if (method == Method::dpls_iv) {
    fit.dpls = dpls_iv_fit(train, dpls_cfg, mode);
    return fit;
  }
  const Matrix zbar = augment_instruments(train.z(), train.x()).zbar;
  SeededRng treatment_rng = rng.derive(1);
  SeededRng outcome_rng = rng.derive(2);
  fit.treatment = fit_linear_method(method, zbar, train.p(), settings, treatment_rng, fit.treatment_q);
  fit.residual_model = residual_model;
  const Vector p_hat = residual_model ? dpls_predict(*residual_model, zbar) : fit.treatment.predict(zbar);
  fit.outcome = fit_linear_method(method, outcome_design(train.p(), p_hat, train.x()), train.y(),
                                  settings, outcome_rng, fit.outcome_q);
  return fit;
}

void write_method_fit(KvDocument& doc, const MethodFit& fit) {
  doc.set("format", std::string(kModelFormat));
  doc.set("method", std::string(to_string(fit.method)));
  if (fit.dpls) {
    write_dpls_iv_fit(doc, "dpls_iv.", *fit.dpls);
    return;
  }
  write_linear_fit(doc, "treatment.", fit.treatment);
  doc.set("treatment.q", fit.treatment_q);
  write_linear_fit(doc, "outcome.", fit.outcome);
  doc.set("outcome.q", fit.outcome_q);
  doc.set("residual_source", std::string(fit.residual_model ? "dpls" : "own"));
  if (fit.residual_model) write_dpls_model(doc, "residual_model.", *fit.residual_model);
}

MethodFit read_method_fit(const KvDocument& doc) {
  if (doc.get_string("format") != kModelFormat) {
    throw DataError("fit file: unsupported format '" + doc.get_string("format") + "'");
  }
  MethodFit fit;
  fit.method = parse_method(doc.get_string("method"));
  if (fit.method == Method::dpls_iv) {
    fit.dpls = read_dpls_iv_fit(doc, "dpls_iv.");
    return fit;
  }
  fit.treatment = read_linear_fit(doc, "treatment.");
  fit.treatment_q = static_cast<int>(doc.get_integer("treatment.q"));
  fit.outcome = read_linear_fit(doc, "outcome.");
  fit.outcome_q = static_cast<int>(doc.get_integer("outcome.q"));
  if (doc.get_string("residual_source") == "dpls") {
    fit.residual_model = read_dpls_model(doc, "residual_model.");
  }
  return fit;
}

std::vector<std::optional<double>> MetricsReport::by_replication(std::string_view method,
                                                                 std::string_view metric) const {
  std::vector<std::optional<double>> out(replications.size());
  for (std::size_t r = 0; r < replications.size(); ++r) {
    for (const MetricRow& row : replications[r].metrics) {
      if (row.method == method && row.metric == metric) out[r] = row.value;
    }
  }
  return out;
}

std::vector<double> MetricsReport::values(std::string_view method, std::string_view metric) const {
  std::vector<double> out;
  for (const auto& v : by_replication(method, metric)) {
    if (v) out.push_back(*v);
  }
  return out;
}

double MetricsReport::median(std::string_view method, std::string_view metric) const {
  const std::vector<double> v = values(method, metric);
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return quantile_of(v, 0.5);
}

std::size_t MetricsReport::failure_count() const {
  std::size_t count = 0;
  for (const auto& r : replications) count += r.failures.size();
  return count;
}

bool MetricsReport::all_failed() const {
  for (const auto& r : replications) {
    if (!r.metrics.empty()) return false;
  }
  return true;
}

SyntheticDraw simulate_replication(const ExperimentConfig& cfg, std::uint64_t seed) {
  return generate(cfg.spec, SeededRng(seed).derive(kDataStream));
}

ReplicationResult run_replication(const ExperimentConfig& cfg, int replication) {
  ReplicationResult result;
  result.replication = replication;
  result.seed = cfg.base_seed + static_cast<std::uint64_t>(replication);
  const SeededRng root(result.seed);

  auto fail = [&](const std::string& method, const std::string& stage, const std::exception& e) {
    result.failures.push_back({method, replication, stage, e.what()});
  };

  std::optional<SyntheticDraw> draw;
  std::optional<std::pair<Dataset, Dataset>> sides;
  try {
    draw = simulate_replication(cfg, result.seed);
    SeededRng split_rng = root.derive(kSplitStream);
    sides = split_dataset(draw->data, cfg.test_fraction, split_rng);
  } catch (const Error& e) {
    fail("all", "data", e);
    return result;
  }
  const Dataset& train = sides->first;
  const Dataset& test = sides->second;
  const Matrix zbar_test = augment_instruments(test.z(), test.x()).zbar;
  const Vector alpha_true = draw->truth.params.treatment_coefficients();

  DplsIvConfig dpls_cfg = cfg.dpls;
  dpls_cfg.treatment.sgd.seed = result.seed;
  const MethodSettings settings{cfg.baseline_folds, cfg.lambda_grid, 10};

  // The DPLS first stage is shared: its residuals feed every linear outcome model.
  std::optional<DplsIvFit> dpls_fit_result;
  std::optional<std::string> dpls_error;
  try {
    dpls_fit_result = dpls_iv_fit(train, dpls_cfg, cfg.mode);
  } catch (const Error& e) {
    dpls_error = e.what();
  }

  for (Method method : cfg.methods) {
    const std::string name(to_string(method));
    const SeededRng method_rng = root.derive(kMethodStreamBase + static_cast<std::uint64_t>(method));
    MethodFit fit;
    try {
      if (method == Method::dpls_iv) {
        if (!dpls_fit_result) throw NumericalError(*dpls_error);
        fit.method = method;
        fit.dpls = dpls_fit_result;
      } else {
        std::optional<DplsModel> residual;
        if (dpls_fit_result) residual = dpls_fit_result->treatment;
        fit = fit_method(method, train, dpls_cfg, cfg.mode, settings, method_rng, residual);
      }
    } catch (const Error& e) {
      fail(name, "fit", e);
      continue;
    }
    try {
      const Vector p_hat = fit.predict_treatment(zbar_test);
      const Vector y_hat = fit.predict_outcome(zbar_test, test.p(), test.x());
      const BiasSummary bias = abs_bias_summary(fit.treatment_coefficients(), alpha_true);
      const double values[] = {r_squared(test.p(), p_hat), rmse(test.p(), p_hat),
                               r_squared(test.y(), y_hat), rmse(test.y(), y_hat),
                               bias.sum,                   fit.policy_effect()};
      for (std::size_t i = 0; i < kMetricOrder.size(); ++i) {
        result.metrics.push_back({name, replication, kMetricOrder[i], values[i]});
      }
      result.abs_bias[name] = bias.abs_bias;
      if (replication == 0) {
        for (Index i = 0; i < test.n(); ++i) {
          result.scatter.push_back({name + "/treatment", test.p()(i), p_hat(i)});
        }
        for (Index i = 0; i < test.n(); ++i) {
          result.scatter.push_back({name + "/outcome", test.y()(i), y_hat(i)});
        }
      }
    } catch (const Error& e) {
      fail(name, "evaluate", e);
    }
  }
  return result;
}

MetricsReport run_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  MetricsReport report;
  report.config = cfg;
  report.replications.resize(static_cast<std::size_t>(cfg.replications));
  const int workers = std::min(cfg.jobs, cfg.replications);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= cfg.replications) return;
      try {
        report.replications[static_cast<std::size_t>(r)] = run_replication(cfg, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return report;
}

std::string format_metrics_csv(const MetricsReport& report) {
  std::string out = "method,replication,metric,value\n";
  for (const auto& rep : report.replications) {
    for (const MetricRow& row : rep.metrics) {
      out += row.method + "," + std::to_string(row.replication) + "," + row.metric + "," +
             format_double(row.value) + "\n";
    }
  }
  return out;
}

std::string format_summary(const MetricsReport& report) {
  const ExperimentConfig& cfg = report.config;
  std::string out;
  out += "design: " + cfg.dgp + "\n";
  out += "replications: " + std::to_string(cfg.replications) + "\n";
  out += "base seed: " + std::to_string(cfg.base_seed) + "\n";
  out += "outcome mode: " + std::string(to_string(cfg.mode)) + "\n";
  out += "failures: " + std::to_string(report.failure_count()) + "\n\n";
  out += "method    metric          median        q25           q75           ok/total\n";
  for (Method m : cfg.methods) {
    const std::string name(to_string(m));
    for (const std::string& metric : kMetricOrder) {
      const std::vector<double> v = report.values(name, metric);
      std::string line = name;
      line.resize(10, ' ');
      std::string metric_col = metric;
      metric_col.resize(16, ' ');
      line += metric_col;
      auto cell = [](const std::string& s) {
        std::string c = s;
        c.resize(14, ' ');
        return c;
      };
      if (v.empty()) {
        line += cell("-") + cell("-") + cell("-");
      } else {
        char buf[3][32];
        std::snprintf(buf[0], sizeof buf[0], "%.6f", quantile_of(v, 0.5));
        std::snprintf(buf[1], sizeof buf[1], "%.6f", quantile_of(v, 0.25));
        std::snprintf(buf[2], sizeof buf[2], "%.6f", quantile_of(v, 0.75));
        line += cell(buf[0]) + cell(buf[1]) + cell(buf[2]);
      }
      line += std::to_string(v.size()) + "/" + std::to_string(cfg.replications);
      out += line + "\n";
    }
  }
  return out;
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "metrics.csv", format_metrics_csv(report));
  write_text(dir / "summary.txt", format_summary(report));
  report.config.to_document().save(dir / "config.resolved.kv");

  std::string seeds = "replication,seed\n";
  std::string failures = "method,replication,stage,message\n";
  for (const auto& rep : report.replications) {
    seeds += std::to_string(rep.replication) + "," + std::to_string(rep.seed) + "\n";
    for (const FailureRow& f : rep.failures) {
      std::string msg = f.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      failures += f.method + "," + std::to_string(f.replication) + "," + f.stage + "," + msg + "\n";
    }
  }
  write_text(dir / "seeds.csv", seeds);
  write_text(dir / "failures.csv", failures);

  std::string cdf = "curve,x,y\n";
  for (Method m : report.config.methods) {
    const std::string name(to_string(m));
    std::vector<double> pooled;
    for (const auto& rep : report.replications) {
      const auto it = rep.abs_bias.find(name);
      if (it == rep.abs_bias.end()) continue;
      pooled.insert(pooled.end(), it->second.data(), it->second.data() + it->second.size());
    }
    pooled = sorted_copy(std::move(pooled));
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      cdf += name + "," + format_double(pooled[i]) + "," +
             format_double(static_cast<double>(i + 1) / static_cast<double>(pooled.size())) + "\n";
    }
  }
  write_text(dir / "bias_cdf.csv", cdf);

  std::string scatter = "curve,x,y\n";
  for (const auto& rep : report.replications) {
    for (const ScatterPoint& pt : rep.scatter) {
      scatter += pt.curve + "," + format_double(pt.actual) + "," + format_double(pt.predicted) + "\n";
    }
  }
  write_text(dir / "scatter.csv", scatter);
}

}  // namespace dpls
