#include "dpls/serialize.hpp"

#include "dpls/error.hpp"

namespace dpls {
namespace {

Vector matrix_to_vector(const Matrix& m) {
  Vector v(m.size());
  for (Index i = 0; i < m.size(); ++i) v(i) = m(i / m.cols(), i % m.cols());
  return v;
}

}  // namespace

void write_linear_fit(KvDocument& doc, const std::string& prefix, const LinearFit& fit) {
  doc.set(prefix + "method", std::string(to_string(fit.method)));
  doc.set(prefix + "lambda", fit.lambda);
  doc.set(prefix + "intercept", fit.intercept);
  doc.set(prefix + "coef", fit.coef);
}

LinearFit read_linear_fit(const KvDocument& doc, const std::string& prefix) {
  LinearFit fit;
  fit.method = parse_linear_method(doc.get_string(prefix + "method"));
  fit.lambda = doc.get_double(prefix + "lambda");
  fit.intercept = doc.get_double(prefix + "intercept");
  fit.coef = doc.get_vector(prefix + "coef");
  return fit;
}

void write_pls_fit(KvDocument& doc, const std::string& prefix, const PlsFit& fit) {
  doc.set(prefix + "q", fit.q);
  doc.set(prefix + "intercept", fit.intercept);
  doc.set(prefix + "p_mean", fit.p_mean);
  doc.set(prefix + "coef", fit.coef);
  doc.set(prefix + "x_means", fit.x_means);
  doc.set(prefix + "y_loadings", fit.y_loadings);
  doc.set_matrix(prefix + "weights", fit.weights);
  doc.set_matrix(prefix + "x_loadings", fit.x_loadings);
}

PlsFit read_pls_fit(const KvDocument& doc, const std::string& prefix) {
  PlsFit fit;
  fit.q = static_cast<int>(doc.get_integer(prefix + "q"));
  fit.intercept = doc.get_double(prefix + "intercept");
  fit.p_mean = doc.get_double(prefix + "p_mean");
  fit.coef = doc.get_vector(prefix + "coef");
  fit.x_means = doc.get_vector(prefix + "x_means");
  fit.y_loadings = doc.get_vector(prefix + "y_loadings");
  fit.weights = doc.get_matrix(prefix + "weights");
  fit.x_loadings = doc.get_matrix(prefix + "x_loadings");
  return fit;
}

void write_dpls_model(KvDocument& doc, const std::string& prefix, const DplsModel& model) {
  write_pls_fit(doc, prefix + "first_layer.", model.first_layer);
  doc.set(prefix + "activation", model.activation.name());
  doc.set(prefix + "target_scale", model.target_scale);
  doc.set(prefix + "history", model.history);
  const auto& layers = model.hidden.layers();
  doc.set(prefix + "layers", static_cast<long long>(layers.size()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string key = prefix + "layer" + std::to_string(l) + ".";
    doc.set(key + "activated", layers[l].activated);
    doc.set(key + "has_bias", layers[l].has_bias);
    doc.set(key + "bias", layers[l].bias);
    doc.set_matrix(key + "weight", layers[l].weight);
  }
}

DplsModel read_dpls_model(const KvDocument& doc, const std::string& prefix) {
  DplsModel model;
  model.first_layer = read_pls_fit(doc, prefix + "first_layer.");
  model.activation = ActivationKind::parse(doc.get_string(prefix + "activation"));
  model.target_scale = doc.get_double(prefix + "target_scale");
  const Vector history = doc.get_vector(prefix + "history");
  model.history.assign(history.data(), history.data() + history.size());
  const long long count = doc.get_integer(prefix + "layers");
  std::vector<DenseLayer> layers;
  for (long long l = 0; l < count; ++l) {
    const std::string key = prefix + "layer" + std::to_string(l) + ".";
    DenseLayer layer;
    layer.activated = doc.get_bool(key + "activated");
    layer.has_bias = doc.get_bool(key + "has_bias");
    layer.bias = doc.get_vector(key + "bias");
    layer.weight = doc.get_matrix(key + "weight");
    layers.push_back(std::move(layer));
  }
  if (!layers.empty()) model.hidden = FeedForward(std::move(layers), model.activation);
  return model;
}

void write_tobit_constants(KvDocument& doc, const std::string& prefix, const TobitConstants& c) {
  doc.set(prefix + "psi1", c.psi1);
  doc.set(prefix + "psi2", c.psi2);
  doc.set(prefix + "sigma_star", c.sigma_star);
  doc.set(prefix + "phi_hat", c.phi_hat);
  doc.set(prefix + "c_k", c.c_k);
  doc.set(prefix + "clamped", c.clamped);
}

TobitConstants read_tobit_constants(const KvDocument& doc, const std::string& prefix) {
  TobitConstants c;
  c.psi1 = doc.get_double(prefix + "psi1");
  c.psi2 = doc.get_double(prefix + "psi2");
  c.sigma_star = doc.get_double(prefix + "sigma_star");
  c.phi_hat = doc.get_double(prefix + "phi_hat");
  c.c_k = doc.get_double(prefix + "c_k");
  c.clamped = doc.get_bool(prefix + "clamped");
  return c;
}

// The training design and residuals are not stored; only what inference needs.
void write_gmm_fit(KvDocument& doc, const std::string& prefix, const TobitGmmFit& fit) {
  doc.set(prefix + "n", static_cast<long long>(fit.n()));
  doc.set(prefix + "beta", fit.beta);
  write_tobit_constants(doc, prefix + "constants.", fit.constants);
  doc.set(prefix + "jittered", fit.jittered);
  doc.set_matrix(prefix + "sigma_star", fit.sigma_star);
  doc.set_matrix(prefix + "corrected_cov", fit.corrected_cov);
}

TobitGmmFit read_gmm_fit(const KvDocument& doc, const std::string& prefix) {
  TobitGmmFit fit;
  const long long n = doc.get_integer(prefix + "n");
  fit.beta = doc.get_vector(prefix + "beta");
  fit.constants = read_tobit_constants(doc, prefix + "constants.");
  fit.jittered = doc.get_bool(prefix + "jittered");
  fit.sigma_star = doc.get_matrix(prefix + "sigma_star");
  fit.corrected_cov = doc.get_matrix(prefix + "corrected_cov");
  // Only the row count of the training design is needed after loading.
  fit.design.resize(n, 0);
  return fit;
}

void write_dpls_iv_fit(KvDocument& doc, const std::string& prefix, const DplsIvFit& fit) {
  doc.set(prefix + "mode", std::string(to_string(fit.mode)));
  doc.set(prefix + "link", std::string(to_string(fit.link)));
  write_dpls_model(doc, prefix + "treatment.", fit.treatment);
  write_gmm_fit(doc, prefix + "outcome.", fit.outcome);
}

DplsIvFit read_dpls_iv_fit(const KvDocument& doc, const std::string& prefix) {
  DplsIvFit fit;
  fit.mode = parse_iv_mode(doc.get_string(prefix + "mode"));
  fit.link = parse_outcome_link(doc.get_string(prefix + "link"));
  fit.treatment = read_dpls_model(doc, prefix + "treatment.");
  fit.outcome = read_gmm_fit(doc, prefix + "outcome.");
  return fit;
}

void write_parameters(KvDocument& doc, const std::string& prefix, const TrueParameters& t) {
  doc.set(prefix + "alpha", t.alpha);
  doc.set(prefix + "alpha_x", t.alpha_x);
  doc.set(prefix + "gamma", t.gamma);
  doc.set(prefix + "beta", t.beta);
  doc.set(prefix + "beta_x", t.beta_x);
}

TrueParameters read_parameters(const KvDocument& doc, const std::string& prefix) {
  TrueParameters t;
  t.alpha = doc.get_vector(prefix + "alpha");
  t.alpha_x = doc.get_vector(prefix + "alpha_x");
  t.gamma = doc.get_vector(prefix + "gamma");
  t.beta = doc.get_double(prefix + "beta");
  t.beta_x = doc.get_vector(prefix + "beta_x");
  return t;
}

KvDocument truth_document(const SyntheticSpec& spec, const GroundTruth& truth) {
  KvDocument doc;
  doc.set("format", std::string(kTruthFormat));
  doc.set("design", std::string(spec.covariance == CovarianceMode::network ? "experiment2"
                                                                          : "experiment1"));
  doc.set("activation_g", spec.activation_g.name());
  doc.set("activation_f", spec.activation_f.name());
  doc.set("sigma_eps", spec.sigma_eps);
  doc.set("sigma_joint", matrix_to_vector(spec.sigma_joint));
  write_parameters(doc, "params.", truth.params);
  doc.set("noise.w", truth.w);
  doc.set("noise.xi", truth.xi);
  doc.set("noise.eps", truth.eps);
  doc.set_matrix("sigma_z", truth.sigma_z);
  doc.set("repair_change", truth.repair_change);
  if (truth.graph) {
    std::vector<int> flat;
    for (const auto& [a, b] : truth.graph->edges) {
      flat.push_back(static_cast<int>(a));
      flat.push_back(static_cast<int>(b));
    }
    doc.set("graph.nodes", static_cast<long long>(truth.graph->nodes));
    doc.set("graph.edges_per_node", static_cast<long long>(truth.graph->edges_per_node));
    doc.set("graph.edges", flat);
  }
  return doc;
}

}  // namespace dpls
