// Command-line front end: simulate, fit, predict and benchmark.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpls/benchmark.hpp"
#include "dpls/dataset.hpp"
#include "dpls/error.hpp"
#include "dpls/io.hpp"
#include "dpls/iv.hpp"
#include "dpls/rng.hpp"
#include "dpls/serialize.hpp"
#include "dpls/stats.hpp"

namespace fs = std::filesystem;
using namespace dpls;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Distinguishes invalid flag values from data problems.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Runs a flag parser, reporting its DataError as a usage error.
template <typename F>
auto flag_value(F&& parse) {
  try {
    return parse();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

constexpr std::uint64_t kPosteriorStream = 0x9057;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig::defaults("experiment1");
  return ExperimentConfig::from_document(KvDocument::load(path));
}

std::string prediction_header(bool with_y) {
  return with_y ? "row,p,p_hat,y,y_hat" : "row,p_hat,y_hat";
}

int run_simulate(const CommonOptions& opt) {
  const ExperimentConfig cfg = load_config(opt.config);
  const std::uint64_t seed = opt.seed.value_or(cfg.base_seed);
  const SyntheticDraw draw = simulate_replication(cfg, seed);
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  write_csv(dir / "data.csv", draw.data);
  KvDocument truth = truth_document(cfg.spec, draw.truth);
  truth.set("seed", static_cast<long long>(seed));
  truth.save(dir / "truth.kv");
  cfg.to_document().save(dir / "config.resolved.kv");
  return kOk;
}

struct FitOptions {
  std::string data;
  std::string method = "dpls_iv";
  std::optional<std::string> mode;
};

int run_fit(const CommonOptions& opt, const FitOptions& fo) {
  ExperimentConfig cfg = load_config(opt.config);
  const Method method = flag_value([&] { return parse_method(fo.method); });
  if (fo.mode) cfg.mode = flag_value([&] { return parse_iv_mode(*fo.mode); });
  const std::uint64_t seed = opt.seed.value_or(cfg.base_seed);
  cfg.dpls.treatment.sgd.seed = seed;

  const Dataset ds = read_csv(fo.data);
  const MethodSettings settings{cfg.baseline_folds, cfg.lambda_grid, 10};
  const MethodFit fit = fit_method(method, ds, cfg.dpls, cfg.mode, settings, SeededRng(seed));

  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  KvDocument doc;
  write_method_fit(doc, fit);
  doc.set("seed", static_cast<long long>(seed));
  doc.save(dir / "fit.kv");

  const Matrix zbar = augment_instruments(ds.z(), ds.x()).zbar;
  const Vector p_hat = fit.predict_treatment(zbar);
  const Vector y_hat = fit.predict_outcome(zbar, ds.p(), ds.x());
  std::string out = prediction_header(true) + "\n";
  for (Index i = 0; i < ds.n(); ++i) {
    out += std::to_string(i) + "," + format_double(ds.p()(i)) + "," + format_double(p_hat(i)) +
           "," + format_double(ds.y()(i)) + "," + format_double(y_hat(i)) + "\n";
  }
  write_text(dir / "predictions.csv", out);
  cfg.to_document().save(dir / "config.resolved.kv");
  return kOk;
}

struct PredictOptions {
  std::string fit;
  std::string data;
  long long draws = 0;
  double level = 0.95;
};

int run_predict(const CommonOptions& opt, const PredictOptions& po) {
  if (!(po.level > 0.0 && po.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  if (po.draws < 0) throw UsageError("--posterior-draws must be non-negative");
  const KvDocument doc = KvDocument::load(po.fit);
  const MethodFit fit = read_method_fit(doc);
  if (po.draws > 0 && !fit.dpls) {
    throw UsageError("--posterior-draws requires a dpls_iv fit");
  }
  const Dataset ds = read_csv(po.data);
  const Matrix zbar = augment_instruments(ds.z(), ds.x()).zbar;
  const Vector p_hat = fit.predict_treatment(zbar);
  const Vector y_hat = fit.predict_outcome(zbar, ds.p(), ds.x());

  Matrix outcome_draws;
  if (po.draws > 0) {
    const std::uint64_t seed =
        opt.seed.value_or(static_cast<std::uint64_t>(doc.get_integer("seed", 0)));
    const TobitGmmFit& gmm = fit.dpls->outcome;
    const PosteriorDraws draws =
        sample_posterior(gmm, gmm.n(), static_cast<Index>(po.draws), SeededRng(seed).derive(kPosteriorStream));
    const Matrix index = posterior_predictive(draws, fit.dpls->outcome_design(zbar, ds.p(), ds.x()));
    outcome_draws.resize(index.rows(), index.cols());
    for (Index d = 0; d < index.cols(); ++d) {
      outcome_draws.col(d) = fit.dpls->link_transform(index.col(d));
    }
  }

  std::string out = "row,p_hat,y_hat";
  if (po.draws > 0) out += ",y_mean,y_lower,y_upper";
  out += "\n";
  const double tail = 0.5 * (1.0 - po.level);
  for (Index i = 0; i < ds.n(); ++i) {
    out += std::to_string(i) + "," + format_double(p_hat(i)) + "," + format_double(y_hat(i));
    if (po.draws > 0) {
      const Vector row = outcome_draws.row(i).transpose();
      out += "," + format_double(row.mean()) + "," + format_double(quantile(row, tail)) + "," +
             format_double(quantile(row, 1.0 - tail));
    }
    out += "\n";
  }
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  write_text(dir / "predictions.csv", out);
  return kOk;
}

struct BenchmarkOptions {
  std::vector<std::string> methods;
  std::optional<std::string> mode;
  std::optional<int> replications;
  std::optional<int> jobs;
  std::optional<double> test_fraction;
};

int run_benchmark_command(const CommonOptions& opt, const BenchmarkOptions& bo) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.base_seed = *opt.seed;
  if (bo.replications) cfg.replications = *bo.replications;
  if (bo.jobs) cfg.jobs = *bo.jobs;
  if (bo.test_fraction) cfg.test_fraction = *bo.test_fraction;
  if (bo.mode) cfg.mode = flag_value([&] { return parse_iv_mode(*bo.mode); });
  if (!bo.methods.empty()) {
    cfg.methods.clear();
    for (const std::string& m : bo.methods) {
      cfg.methods.push_back(flag_value([&] { return parse_method(m); }));
    }
  }
  flag_value([&] {
    cfg.validate();
    return 0;
  });
  const MetricsReport report = run_benchmark(cfg);
  write_report(report, opt.out_dir);
  std::cout << format_summary(report);
  return report.all_failed() ? kNumerical : kOk;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool with_config) {
  if (with_config) cmd->add_option("--config", opt.config, "Key-value configuration file");
  cmd->add_option("--seed", opt.seed, "Seed (defaults to experiment.base_seed)");
  cmd->add_option("--out-dir", opt.out_dir, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep partial least squares for instrumental-variable regression"};
  app.require_subcommand(1);

  CommonOptions common;

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset and truth record");
  add_common(simulate, common, true);

  FitOptions fit_opt;
  CLI::App* fit = app.add_subcommand("fit", "Fit one method on a dataset");
  add_common(fit, common, true);
  fit->add_option("--data", fit_opt.data, "Dataset CSV")->required();
  fit->add_option("--method", fit_opt.method, "ols, ridge, lasso, pls or dpls_iv")
      ->capture_default_str();
  fit->add_option("--mode", fit_opt.mode, "rescale_gmm or control_function");

  PredictOptions predict_opt;
  CLI::App* predict = app.add_subcommand("predict", "Predict from a saved fit");
  add_common(predict, common, false);
  predict->add_option("--fit", predict_opt.fit, "fit.kv written by the fit command")->required();
  predict->add_option("--data", predict_opt.data, "Dataset CSV")->required();
  predict->add_option("--posterior-draws", predict_opt.draws,
                      "Posterior draws for predictive intervals (dpls_iv only)");
  predict->add_option("--level", predict_opt.level, "Interval level")->capture_default_str();

  BenchmarkOptions bench_opt;
  CLI::App* bench = app.add_subcommand("benchmark", "Run the replication study");
  add_common(bench, common, true);
  bench->add_option("--method", bench_opt.methods, "Restrict to these methods (repeatable)");
  bench->add_option("--mode", bench_opt.mode, "rescale_gmm or control_function");
  bench->add_option("--replications", bench_opt.replications, "Number of replications");
  bench->add_option("--jobs", bench_opt.jobs, "Concurrent replications");
  bench->add_option("--test-fraction", bench_opt.test_fraction, "Held-out share of rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(common);
    if (fit->parsed()) return run_fit(common, fit_opt);
    if (predict->parsed()) return run_predict(common, predict_opt);
    if (bench->parsed()) return run_benchmark_command(common, bench_opt);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
