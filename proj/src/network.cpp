#include "dpls/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <span>
#include <string>

#include "dpls/error.hpp"
#include "dpls/linear.hpp"
#include "dpls/stats.hpp"

namespace dpls {
namespace {

constexpr std::uint64_t kQSelectionStream = 0x71;
constexpr std::uint64_t kShuffleStream = 0x5d;

struct Trace {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post[0] is the input, post[l+1] the output of layer l
};

Trace forward_trace(const std::vector<DenseLayer>& layers, const ActivationKind& act,
                    const Matrix& input) {
  Trace tr;
  tr.post.push_back(input);
  for (const DenseLayer& layer : layers) {
    Matrix z = tr.post.back() * layer.weight.transpose();
    if (layer.has_bias) z.rowwise() += layer.bias.transpose();
    Matrix a = z;
    if (layer.activated) a = z.unaryExpr([&](double t) { return act.apply(t); });
    tr.pre.push_back(std::move(z));
    tr.post.push_back(std::move(a));
  }
  return tr;
}

void check_stack_input(const FeedForward& net, const Matrix& input) {
  if (net.empty()) throw DataError("feed-forward: network has no layers");
  if (input.cols() != net.layers().front().weight.cols()) {
    throw DataError("feed-forward: input has " + std::to_string(input.cols()) +
                    " columns, first layer expects " +
                    std::to_string(net.layers().front().weight.cols()));
  }
}

double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const Vector c = center(v);
  return std::sqrt(c.squaredNorm() / static_cast<double>(v.size() - 1));
}

// Linear index of the target on the current activations.
LinearFit index_fit(const Matrix& features, const Vector& target, InitMethod method) {
  if (method == InitMethod::pls && features.cols() >= 1) {
    try {
      const PlsFit pls = fit_pls_closed_form(features, target, 1);
      LinearFit fit;
      fit.coef = pls.coef;
      fit.intercept = pls.intercept;
      return fit;
    } catch (const NumericalError&) {
      // Degenerate activations: fall through to the ridge index.
    }
  }
  return fit_ridge_gcv(features, target);
}

// Hinge neurons sign_j * (index - knot_j), knots at evenly spaced quantiles.
DenseLayer hinge_layer(const LinearFit& index, const Vector& index_values, int width,
                       bool use_bias) {
  DenseLayer layer;
  layer.weight.resize(width, index.coef.size());
  layer.bias = Vector::Zero(width);
  layer.has_bias = use_bias;
  layer.activated = true;
  for (int j = 0; j < width; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    const double knot =
        quantile(index_values, (static_cast<double>(j) + 0.5) / static_cast<double>(width));
    layer.weight.row(j) = sign * index.coef.transpose();
    if (use_bias) layer.bias(j) = sign * (index.intercept - knot);
  }
  return layer;
}

}  // namespace

ActivationKind ActivationKind::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    throw DataError("leaky_relu: slope must lie in (0, 1), got " + std::to_string(slope));
  }
  return {Tag::leaky_relu, slope};
}

ActivationKind ActivationKind::parse(std::string_view text) {
  if (text == "relu") return relu();
  if (text == "identity") return identity();
  if (text == "leaky_relu") return leaky_relu(0.01);
  constexpr std::string_view prefix = "leaky_relu:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string_view rest = text.substr(prefix.size());
    double slope = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), slope);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw DataError("activation: bad leaky_relu slope '" + std::string(rest) + "'");
    }
    return leaky_relu(slope);
  }
  throw DataError("activation: unknown kind '" + std::string(text) + "'");
}

std::string ActivationKind::name() const {
  switch (tag) {
    case Tag::relu: return "relu";
    case Tag::identity: return "identity";
    case Tag::leaky_relu: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, slope);
      return "leaky_relu:" + std::string(buf, res.ptr);
    }
  }
  return "relu";
}

std::string_view to_string(InitMethod method) {
  return method == InitMethod::ols ? "ols" : "pls";
}

InitMethod parse_init_method(std::string_view text) {
  if (text == "ols") return InitMethod::ols;
  if (text == "pls") return InitMethod::pls;
  throw DataError("unknown layer initialisation '" + std::string(text) + "' (expected ols or pls)");
}

FeedForward::FeedForward(std::vector<DenseLayer> layers, ActivationKind activation)
    : layers_(std::move(layers)), activation_(activation) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw DataError("feed-forward: bias length disagrees with layer " + std::to_string(l));
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw DataError("feed-forward: layer " + std::to_string(l) + " input width mismatch");
    }
  }
  if (!layers_.empty() && layers_.back().weight.rows() != 1) {
    throw DataError("feed-forward: output layer must have width 1");
  }
}

Vector FeedForward::forward(const Matrix& input) const {
  check_stack_input(*this, input);
  const Trace tr = forward_trace(layers_, activation_, input);
  return tr.post.back().col(0);
}

double FeedForward::loss(const Matrix& input, const Vector& target) const {
  const Vector out = forward(input);
  if (out.size() != target.size()) throw DataError("feed-forward: target length mismatch");
  return (out - target).squaredNorm() / static_cast<double>(target.size());
}

double FeedForward::loss_and_gradient(const Matrix& input, const Vector& target,
                                      Gradient& grad) const {
  check_stack_input(*this, input);
  if (input.rows() != target.size() || target.size() == 0) {
    throw DataError("feed-forward: target length mismatch");
  }
  const Trace tr = forward_trace(layers_, activation_, input);
  const double n = static_cast<double>(target.size());
  const Vector resid = tr.post.back().col(0) - target;

  grad.weight.resize(layers_.size());
  grad.bias.resize(layers_.size());
  Matrix delta = (2.0 / n) * resid;  // dL/d(post of last layer), n x 1
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    if (layer.activated) {
      delta.array() *=
          tr.pre[l].unaryExpr([&](double t) { return activation_.derivative(t); }).array();
    }
    grad.weight[l] = delta.transpose() * tr.post[l];
    grad.bias[l] = layer.has_bias ? Vector(delta.colwise().sum().transpose())
                                  : Vector::Zero(layer.bias.size());
    if (l > 0) delta = delta * layer.weight;
  }
  return resid.squaredNorm() / n;
}

void FeedForward::apply_update(const Gradient& grad, double learning_rate) {
  if (grad.weight.size() != layers_.size() || grad.bias.size() != layers_.size()) {
    throw DataError("feed-forward: gradient has the wrong number of layers");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight -= learning_rate * grad.weight[l];
    if (layers_[l].has_bias) layers_[l].bias -= learning_rate * grad.bias[l];
  }
}

std::vector<double> sgd_train(FeedForward& net, const Matrix& input, const Vector& target,
                              const SgdParams& sgd) {
  if (sgd.batch_size < 1) throw DataError("sgd: batch_size must be positive");
  if (sgd.epochs < 0) throw DataError("sgd: epochs must be non-negative");
  if (!(sgd.learning_rate >= 0.0) || !std::isfinite(sgd.learning_rate)) {
    throw DataError("sgd: learning_rate must be finite and non-negative");
  }
  if (input.rows() != target.size()) throw DataError("sgd: target length mismatch");
  const Index n = input.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  SeededRng rng = SeededRng(sgd.seed).derive(kShuffleStream);
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(sgd.epochs));
  FeedForward::Gradient grad;
  for (int epoch = 0; epoch < sgd.epochs; ++epoch) {
    rng.shuffle(std::span<Index>(order));
    if (sgd.learning_rate > 0.0) {
      for (Index start = 0; start < n; start += sgd.batch_size) {
        const Index stop = std::min<Index>(n, start + sgd.batch_size);
        Matrix xb(stop - start, input.cols());
        Vector yb(stop - start);
        for (Index i = start; i < stop; ++i) {
          const Index row = order[static_cast<std::size_t>(i)];
          xb.row(i - start) = input.row(row);
          yb(i - start) = target(row);
        }
        net.loss_and_gradient(xb, yb, grad);
        net.apply_update(grad, sgd.learning_rate);
      }
    }
    const double loss = net.loss(input, target);
    if (!std::isfinite(loss)) {
      throw DivergenceError("sgd: training loss became non-finite at epoch " +
                                std::to_string(epoch + 1),
                            epoch + 1);
    }
    history.push_back(loss);
  }
  return history;
}

Matrix DplsModel::first_layer_features(const Matrix& zbar) const {
  const Vector pred = first_layer.predict(zbar);
  Matrix h(pred.size(), 1);
  for (Index i = 0; i < pred.size(); ++i) h(i, 0) = activation.apply(pred(i)) / target_scale;
  return h;
}

DplsModel dpls_fit(const Matrix& zbar, const Vector& p, const DplsConfig& cfg) {
  if (zbar.rows() != p.size()) throw DataError("dpls_fit: zbar and p row counts differ");
  if (zbar.rows() < 2) throw DataError("dpls_fit: need at least 2 rows");
  for (int w : cfg.hidden_widths) {
    if (w < 1) throw DataError("dpls_fit: hidden widths must be positive");
  }
  const int d = static_cast<int>(zbar.cols());
  int q = 0;
  if (cfg.first_layer_q) {
    q = *cfg.first_layer_q;
  } else {
    SeededRng rng = SeededRng(cfg.sgd.seed).derive(kQSelectionStream);
    q = select_q_cv(zbar, p, std::min(cfg.q_max, d), cfg.cv_folds, rng).q;
  }

  DplsModel model;
  model.activation = cfg.activation;
  model.first_layer = fit_pls(zbar, p, q, cfg.first_layer_algorithm);
  const double sd = sample_sd(p);
  model.target_scale = sd > 0.0 ? sd : 1.0;
  if (cfg.hidden_widths.empty()) return model;

  const Vector target = p / model.target_scale;
  Matrix features = model.first_layer_features(zbar);
  std::vector<DenseLayer> layers;
  for (int width : cfg.hidden_widths) {
    const LinearFit index = index_fit(features, target, cfg.second_layer_method);
    const Vector values = index.predict(features);
    DenseLayer layer = hinge_layer(index, values, width, cfg.use_bias);
    Matrix z = features * layer.weight.transpose();
    if (layer.has_bias) z.rowwise() += layer.bias.transpose();
    features = z.unaryExpr([&](double t) { return cfg.activation.apply(t); });
    layers.push_back(std::move(layer));
  }
  const LinearFit out = fit_ridge_gcv(features, target, cfg.use_bias);
  DenseLayer output;
  output.weight = out.coef.transpose();
  output.bias = Vector::Constant(1, out.intercept);
  output.has_bias = cfg.use_bias;
  output.activated = !cfg.linear_output;
  layers.push_back(std::move(output));
  model.hidden = FeedForward(std::move(layers), cfg.activation);

  return sgd_refine(std::move(model), zbar, p, cfg.sgd);
}

DplsModel sgd_refine(DplsModel model, const Matrix& zbar, const Vector& p, const SgdParams& sgd) {
  if (model.hidden.empty()) return model;
  const Matrix features = model.first_layer_features(zbar);
  const Vector target = p / model.target_scale;
  model.history = sgd_train(model.hidden, features, target, sgd);
  return model;
}

Vector dpls_predict(const DplsModel& model, const Matrix& zbar) {
  if (model.hidden.empty()) {
    return model.first_layer.predict(zbar).unaryExpr(
        [&](double t) { return model.activation.apply(t); });
  }
  return model.target_scale * model.hidden.forward(model.first_layer_features(zbar));
}

}  // namespace dpls
