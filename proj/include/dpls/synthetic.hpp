#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dpls/dataset.hpp"
#include "dpls/network.hpp"
#include "dpls/rng.hpp"
#include "dpls/types.hpp"

namespace dpls {

enum class CovarianceMode { near_diagonal, network };

/// Coefficients of the simulation design. beta is the scalar policy effect.
struct TrueParameters {
  Vector alpha;    // m, trailing m_redundant entries zero
  Vector alpha_x;  // k
  Vector gamma;    // m, weights on sigmoid(z^2)
  double beta = 0.0;
  Vector beta_x;   // k, trailing k_null entries zero

  /// [alpha, alpha_x], the treatment-network coefficient vector.
  Vector treatment_coefficients() const;
};

/// p = g(z alpha + sigmoid(z^2) gamma + x alpha_x) + w
/// y = f(p beta + x beta_x + xi) + eps
/// with (w, xi) ~ N(0, sigma_joint). The second margin of sigma_joint is
/// labelled xi; it is the same draw some write as u.
struct SyntheticSpec {
  Index n = 1000;
  Index m = 50;
  Index m_redundant = 10;
  Index k = 25;
  Index k_null = 20;
  Matrix sigma_joint = default_sigma_joint();
  double sigma_eps = 0.1;
  ActivationKind activation_g = ActivationKind::relu();
  ActivationKind activation_f = ActivationKind::relu();
  /// When set, coefficients (and the instrument graph) come from this seed and
  /// are shared by every replication; otherwise each dataset draws its own.
  std::optional<std::uint64_t> coefficient_seed;
  /// When set, these coefficients are used verbatim.
  std::optional<TrueParameters> parameters;
  CovarianceMode covariance = CovarianceMode::near_diagonal;
  double near_diagonal_c = 0.001;
  double network_base = 0.7;
  Index edges_per_node = 1;

  static Matrix default_sigma_joint();
  static SyntheticSpec experiment1();
  static SyntheticSpec experiment2();
  void validate() const;
};

struct InstrumentGraph {
  Index nodes = 0;
  Index edges_per_node = 1;
  std::vector<std::pair<Index, Index>> edges;  // i < j, in insertion order
  std::vector<std::vector<Index>> adjacency;   // sorted neighbour lists

  std::vector<Index> degrees() const;
};

/// Everything needed to recompute p and y from the dataset.
struct GroundTruth {
  TrueParameters params;
  Vector w;
  Vector xi;
  Vector eps;
  Matrix sigma_z;
  std::optional<InstrumentGraph> graph;
  double repair_change = 0.0;  // max |entry change| of the covariance repair
};

struct SyntheticDraw {
  Dataset data;
  GroundTruth truth;
};

/// Coefficients alpha, alpha_x, gamma, beta, beta_x ~ N(0, 1) with the
/// sparsity pattern of the spec applied.
TrueParameters draw_parameters(const SyntheticSpec& spec, SeededRng& rng);

SyntheticDraw gen_experiment1(const SyntheticSpec& spec, const SeededRng& rng);
SyntheticDraw gen_experiment2(const SyntheticSpec& spec, const SeededRng& rng);
/// Dispatches on spec.covariance.
SyntheticDraw generate(const SyntheticSpec& spec, const SeededRng& rng);

/// p and y recomputed from (z, x) and the truth record.
std::pair<Vector, Vector> recompute_outcomes(const SyntheticSpec& spec, const Matrix& z,
                                             const Matrix& x, const GroundTruth& truth);

/// Growth process: a clique on edges_per_node + 1 nodes, then each new node
/// links to edges_per_node distinct existing nodes chosen proportionally to degree.
InstrumentGraph gen_preferential_attachment(Index nodes, Index edges_per_node, SeededRng& rng);

/// Unweighted all-pairs shortest paths by breadth-first search.
/// Throws DataError on a disconnected graph.
Matrix shortest_path_matrix(const InstrumentGraph& graph);

struct CovarianceRepair {
  Matrix cov;
  double max_change = 0.0;
};

/// base^D elementwise, eigenvalues clipped at 1e-10 and rescaled to unit diagonal.
CovarianceRepair distance_to_cov(const Matrix& distances, double base);

/// Rows drawn from N(0, cov) via Cholesky with diagonal jitter 1e-10, growing
/// tenfold on each of at most 3 retries.
Matrix sample_mvn(const Matrix& cov, Index n, SeededRng& rng);

}  // namespace dpls
