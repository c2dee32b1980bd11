#include "dpls/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "dpls/error.hpp"

namespace dpls {
namespace {

// Stream ids for the independent pieces of one dataset.
constexpr std::uint64_t kParamStream = 1;
constexpr std::uint64_t kGraphStream = 2;
constexpr std::uint64_t kInstrumentStream = 3;
constexpr std::uint64_t kCovariateStream = 4;
constexpr std::uint64_t kJointNoiseStream = 5;
constexpr std::uint64_t kOutcomeNoiseStream = 6;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

Vector normals(Index size, SeededRng& rng) {
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = rng.normal();
  return v;
}

Matrix normal_matrix(Index rows, Index cols, SeededRng& rng) {
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
  }
  return a;
}

// Symmetric square root of a small PSD matrix (handles singular input).
Matrix psd_root(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Vector ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-12 * scale) {
    throw DataError("synthetic: sigma_joint is not positive semidefinite");
  }
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

struct Coefficients {
  TrueParameters params;
  std::optional<InstrumentGraph> graph;
};

Coefficients resolve_coefficients(const SyntheticSpec& spec, const SeededRng& rng) {
  const SeededRng source =
      spec.coefficient_seed ? SeededRng(*spec.coefficient_seed) : rng;
  Coefficients out;
  if (spec.parameters) {
    out.params = *spec.parameters;
  } else {
    SeededRng param_rng = source.derive(kParamStream);
    out.params = draw_parameters(spec, param_rng);
  }
  if (spec.covariance == CovarianceMode::network) {
    SeededRng graph_rng = source.derive(kGraphStream);
    out.graph = gen_preferential_attachment(spec.m, spec.edges_per_node, graph_rng);
  }
  return out;
}

SyntheticDraw assemble(const SyntheticSpec& spec, const SeededRng& rng, Coefficients coef,
                       Matrix sigma_z, double repair_change) {
  SeededRng z_rng = rng.derive(kInstrumentStream);
  SeededRng x_rng = rng.derive(kCovariateStream);
  SeededRng joint_rng = rng.derive(kJointNoiseStream);
  SeededRng eps_rng = rng.derive(kOutcomeNoiseStream);

  Matrix z = sample_mvn(sigma_z, spec.n, z_rng);
  Matrix x = normal_matrix(spec.n, spec.k, x_rng);

  GroundTruth truth;
  truth.params = std::move(coef.params);
  truth.graph = std::move(coef.graph);
  truth.sigma_z = std::move(sigma_z);
  truth.repair_change = repair_change;

  const Matrix root = psd_root(spec.sigma_joint);
  truth.w.resize(spec.n);
  truth.xi.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    const double a = joint_rng.normal();
    const double b = joint_rng.normal();
    truth.w(i) = root(0, 0) * a + root(0, 1) * b;
    truth.xi(i) = root(1, 0) * a + root(1, 1) * b;
  }
  truth.eps = spec.sigma_eps * normals(spec.n, eps_rng);

  auto [p, y] = recompute_outcomes(spec, z, x, truth);
  return SyntheticDraw{Dataset(std::move(y), std::move(p), std::move(z), std::move(x)),
                       std::move(truth)};
}

}  // namespace

Vector TrueParameters::treatment_coefficients() const {
  Vector out(alpha.size() + alpha_x.size());
  out << alpha, alpha_x;
  return out;
}

Matrix SyntheticSpec::default_sigma_joint() {
  Matrix s(2, 2);
  s << 3.000, -0.087, -0.087, 0.010;
  return s;
}

SyntheticSpec SyntheticSpec::experiment1() { return SyntheticSpec{}; }

SyntheticSpec SyntheticSpec::experiment2() {
  SyntheticSpec spec;
  spec.covariance = CovarianceMode::network;
  return spec;
}

void SyntheticSpec::validate() const {
  if (n < 2) throw DataError("synthetic: n must be at least 2");
  if (m < 1) throw DataError("synthetic: m must be at least 1");
  if (k < 0) throw DataError("synthetic: k must be non-negative");
  if (m_redundant < 0 || m_redundant > m) throw DataError("synthetic: need 0 <= m_redundant <= m");
  if (k_null < 0 || k_null > k) throw DataError("synthetic: need 0 <= k_null <= k");
  if (sigma_joint.rows() != 2 || sigma_joint.cols() != 2) {
    throw DataError("synthetic: sigma_joint must be 2 x 2");
  }
  if (std::abs(sigma_joint(0, 1) - sigma_joint(1, 0)) >
      1e-12 * std::max(1.0, sigma_joint.cwiseAbs().maxCoeff())) {
    throw DataError("synthetic: sigma_joint must be symmetric");
  }
  psd_root(sigma_joint);
  if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps)) {
    throw DataError("synthetic: sigma_eps must be finite and non-negative");
  }
  if (covariance == CovarianceMode::network) {
    if (!(network_base > 0.0 && network_base < 1.0)) {
      throw DataError("synthetic: network_base must lie in (0, 1)");
    }
    if (edges_per_node < 1 || m < edges_per_node + 1) {
      throw DataError("synthetic: need edges_per_node >= 1 and m >= edges_per_node + 1");
    }
  }
  if (parameters) {
    if (parameters->alpha.size() != m || parameters->gamma.size() != m ||
        parameters->alpha_x.size() != k || parameters->beta_x.size() != k) {
      throw DataError("synthetic: supplied parameters do not match m and k");
    }
  }
}

std::vector<Index> InstrumentGraph::degrees() const {
  std::vector<Index> d(adjacency.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i) d[i] = static_cast<Index>(adjacency[i].size());
  return d;
}

TrueParameters draw_parameters(const SyntheticSpec& spec, SeededRng& rng) {
  TrueParameters t;
  t.alpha = normals(spec.m, rng);
  t.alpha_x = normals(spec.k, rng);
  t.gamma = normals(spec.m, rng);
  t.beta = rng.normal();
  t.beta_x = normals(spec.k, rng);
  t.alpha.tail(spec.m_redundant).setZero();
  t.beta_x.tail(spec.k_null).setZero();
  return t;
}

std::pair<Vector, Vector> recompute_outcomes(const SyntheticSpec& spec, const Matrix& z,
                                             const Matrix& x, const GroundTruth& truth) {
  const TrueParameters& t = truth.params;
  const Matrix squashed = z.array().square().unaryExpr([](double v) { return sigmoid(v); });
  Vector index = z * t.alpha + squashed * t.gamma;
  if (x.cols() > 0) index += x * t.alpha_x;
  Vector p = index.unaryExpr([&](double v) { return spec.activation_g.apply(v); }) + truth.w;
  Vector latent = p * t.beta + truth.xi;
  if (x.cols() > 0) latent += x * t.beta_x;
  Vector y = latent.unaryExpr([&](double v) { return spec.activation_f.apply(v); }) + truth.eps;
  return {std::move(p), std::move(y)};
}

SyntheticDraw gen_experiment1(const SyntheticSpec& spec, const SeededRng& rng) {
  spec.validate();
  Matrix sigma_z = Matrix::Constant(spec.m, spec.m, spec.near_diagonal_c);
  sigma_z.diagonal().setOnes();
  return assemble(spec, rng, resolve_coefficients(spec, rng), std::move(sigma_z), 0.0);
}

SyntheticDraw gen_experiment2(const SyntheticSpec& spec, const SeededRng& rng) {
  if (spec.covariance != CovarianceMode::network) {
    throw DataError("gen_experiment2: spec must use the network covariance mode");
  }
  spec.validate();
  Coefficients coef = resolve_coefficients(spec, rng);
  CovarianceRepair repair = distance_to_cov(shortest_path_matrix(*coef.graph), spec.network_base);
  return assemble(spec, rng, std::move(coef), std::move(repair.cov), repair.max_change);
}

SyntheticDraw generate(const SyntheticSpec& spec, const SeededRng& rng) {
  return spec.covariance == CovarianceMode::network ? gen_experiment2(spec, rng)
                                                    : gen_experiment1(spec, rng);
}

InstrumentGraph gen_preferential_attachment(Index nodes, Index edges_per_node, SeededRng& rng) {
  if (edges_per_node < 1) throw DataError("preferential attachment: edges_per_node must be >= 1");
  if (nodes < edges_per_node + 1) {
    throw DataError("preferential attachment: need at least edges_per_node + 1 nodes");
  }
  InstrumentGraph g;
  g.nodes = nodes;
  g.edges_per_node = edges_per_node;
  g.adjacency.assign(static_cast<std::size_t>(nodes), {});
  // Each node appears once per incident edge, so uniform picks are degree-proportional.
  std::vector<Index> endpoints;
  auto link = [&](Index a, Index b) {
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
    g.adjacency[static_cast<std::size_t>(a)].push_back(b);
    g.adjacency[static_cast<std::size_t>(b)].push_back(a);
    endpoints.push_back(a);
    endpoints.push_back(b);
  };
  const Index seed_size = edges_per_node + 1;
  for (Index i = 0; i < seed_size; ++i) {
    for (Index j = i + 1; j < seed_size; ++j) link(i, j);
  }
  std::vector<Index> targets;
  for (Index v = seed_size; v < nodes; ++v) {
    targets.clear();
    while (static_cast<Index>(targets.size()) < edges_per_node) {
      const Index pick = endpoints[static_cast<std::size_t>(rng.below(endpoints.size()))];
      if (std::find(targets.begin(), targets.end(), pick) == targets.end()) targets.push_back(pick);
    }
    for (Index t : targets) link(v, t);
  }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

Matrix shortest_path_matrix(const InstrumentGraph& graph) {
  const Index n = graph.nodes;
  if (static_cast<Index>(graph.adjacency.size()) != n) {
    throw DataError("shortest_path_matrix: adjacency size disagrees with node count");
  }
  Matrix d(n, n);
  std::vector<Index> dist(static_cast<std::size_t>(n));
  std::deque<Index> queue;
  for (Index s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), Index{-1});
    dist[static_cast<std::size_t>(s)] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const Index u = queue.front();
      queue.pop_front();
      for (Index v : graph.adjacency[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
    for (Index t = 0; t < n; ++t) {
      if (dist[static_cast<std::size_t>(t)] < 0) {
        throw DataError("shortest_path_matrix: graph is disconnected (no path from node " +
                        std::to_string(s) + " to node " + std::to_string(t) + ")");
      }
      d(s, t) = static_cast<double>(dist[static_cast<std::size_t>(t)]);
    }
  }
  return d;
}

CovarianceRepair distance_to_cov(const Matrix& distances, double base) {
  if (distances.rows() != distances.cols()) throw DataError("distance_to_cov: D must be square");
  if (!(base > 0.0 && base < 1.0)) throw DataError("distance_to_cov: base must lie in (0, 1)");
  const Matrix raw = distances.unaryExpr([&](double v) { return std::pow(base, v); });
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(raw);
  const Vector clipped = eig.eigenvalues().cwiseMax(1e-10);
  Matrix fixed = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  const Vector scale = fixed.diagonal().cwiseSqrt().cwiseInverse();
  fixed = scale.asDiagonal() * fixed * scale.asDiagonal();
  fixed = 0.5 * (fixed + fixed.transpose());
  fixed.diagonal().setOnes();
  CovarianceRepair out;
  out.max_change = (fixed - raw).cwiseAbs().maxCoeff();
  out.cov = std::move(fixed);
  return out;
}

Matrix sample_mvn(const Matrix& cov, Index n, SeededRng& rng) {
  const Index d = cov.rows();
  if (cov.cols() != d) throw DataError("sample_mvn: covariance must be square");
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  for (int retry = 0; llt.info() != Eigen::Success; ++retry) {
    if (retry == 3) throw NumericalError("sample_mvn: covariance is not positive definite");
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    Matrix bumped = cov;
    bumped.diagonal().array() += jitter;
    llt.compute(bumped);
  }
  const Matrix lower = llt.matrixL();
  const Matrix draws = normal_matrix(n, d, rng);
  return draws * lower.transpose();
}

}  // namespace dpls
