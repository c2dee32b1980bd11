#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpls/pls.hpp"
#include "dpls/types.hpp"

namespace dpls {

/// Elementwise nonlinearity. relu and leaky_relu are the network activations;
/// identity is used for linear output layers and linear synthetic designs.
struct ActivationKind {
  enum class Tag { relu, leaky_relu, identity };

  Tag tag = Tag::relu;
  double slope = 0.0;  // leaky_relu only, in (0, 1)

  static ActivationKind relu() { return {Tag::relu, 0.0}; }
  static ActivationKind leaky_relu(double slope);
  static ActivationKind identity() { return {Tag::identity, 0.0}; }

  /// "relu", "identity", "leaky_relu" (slope 0.01) or "leaky_relu:<slope>".
  static ActivationKind parse(std::string_view text);
  std::string name() const;

  double apply(double t) const {
    switch (tag) {
      case Tag::relu: return t > 0.0 ? t : 0.0;
      case Tag::leaky_relu: return t > 0.0 ? t : slope * t;
      case Tag::identity: return t;
    }
    return t;
  }

  // Subgradient 0 at the relu kink.
  double derivative(double t) const {
    switch (tag) {
      case Tag::relu: return t > 0.0 ? 1.0 : 0.0;
      case Tag::leaky_relu: return t > 0.0 ? 1.0 : slope;
      case Tag::identity: return 1.0;
    }
    return 1.0;
  }

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;
};

inline double activation_apply(const ActivationKind& kind, double t) { return kind.apply(t); }

/// Affine map followed (optionally) by the network activation.
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  bool activated = true;
  bool has_bias = true;
};

/// Layer stack mapping an n x in input to an n-vector output. Gradients are
/// with respect to mean squared error over the rows passed in.
class FeedForward {
 public:
  struct Gradient {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
  };

  FeedForward() = default;
  FeedForward(std::vector<DenseLayer> layers, ActivationKind activation);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const ActivationKind& activation() const { return activation_; }
  bool empty() const { return layers_.empty(); }

  Vector forward(const Matrix& input) const;
  double loss(const Matrix& input, const Vector& target) const;
  /// Reverse-mode accumulation; returns the loss.
  double loss_and_gradient(const Matrix& input, const Vector& target, Gradient& grad) const;
  /// params -= learning_rate * grad (bias entries skipped when has_bias is false).
  void apply_update(const Gradient& grad, double learning_rate);

 private:
  std::vector<DenseLayer> layers_;
  ActivationKind activation_;
};

struct SgdParams {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 200;
  std::uint64_t seed = 0;
};

enum class InitMethod { ols, pls };

std::string_view to_string(InitMethod method);
InitMethod parse_init_method(std::string_view text);

struct DplsConfig {
  std::vector<int> hidden_widths;  // one entry per hidden layer after the PLS layer
  ActivationKind activation = ActivationKind::relu();
  std::optional<int> first_layer_q;  // nullopt: chosen by cross-validation
  int q_max = 10;
  int cv_folds = 5;
  PlsAlgorithm first_layer_algorithm = PlsAlgorithm::closed_form;
  SgdParams sgd;
  InitMethod second_layer_method = InitMethod::ols;
  bool use_bias = true;
  bool linear_output = false;  // false: activation on the output, as in the layer recursion
};

/// PLS first layer followed by the refined hidden stack.
///
/// The first layer output is f(PLS prediction). The hidden stack works on that
/// scalar divided by target_scale and its output is multiplied back, so the
/// stack sees unit-scale targets regardless of the units of p.
struct DplsModel {
  PlsFit first_layer;
  ActivationKind activation;
  FeedForward hidden;  // empty when there are no hidden layers
  double target_scale = 1.0;
  std::vector<double> history;  // training MSE after each epoch, in scaled units

  /// f(PLS prediction) / target_scale as an n x 1 matrix.
  Matrix first_layer_features(const Matrix& zbar) const;
};

DplsModel dpls_fit(const Matrix& zbar, const Vector& p, const DplsConfig& cfg);
Vector dpls_predict(const DplsModel& model, const Matrix& zbar);

/// Mini-batch SGD over the hidden stack only; the PLS layer is left untouched.
/// Throws DivergenceError on a non-finite epoch loss.
DplsModel sgd_refine(DplsModel model, const Matrix& zbar, const Vector& p, const SgdParams& sgd);

/// SGD on an arbitrary stack (exposed for gradient and update tests).
std::vector<double> sgd_train(FeedForward& net, const Matrix& input, const Vector& target,
                              const SgdParams& sgd);

}  // namespace dpls
