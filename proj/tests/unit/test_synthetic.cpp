#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpls/error.hpp"
#include "dpls/stats.hpp"
#include "dpls/synthetic.hpp"
#include "helpers.hpp"

namespace dpls {
namespace {

double correlation(const Vector& a, const Vector& b) {
  const Vector ca = center(a), cb = center(b);
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

// Independent all-pairs oracle.
Matrix floyd_warshall(const InstrumentGraph& g) {
  const double inf = std::numeric_limits<double>::infinity();
  Matrix d = Matrix::Constant(g.nodes, g.nodes, inf);
  for (Index i = 0; i < g.nodes; ++i) d(i, i) = 0.0;
  for (const auto& [a, b] : g.edges) d(a, b) = d(b, a) = 1.0;
  for (Index k = 0; k < g.nodes; ++k) {
    for (Index i = 0; i < g.nodes; ++i) {
      for (Index j = 0; j < g.nodes; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    }
  }
  return d;
}

InstrumentGraph path_graph(Index nodes) {
  InstrumentGraph g;
  g.nodes = nodes;
  g.adjacency.resize(static_cast<std::size_t>(nodes));
  for (Index i = 0; i + 1 < nodes; ++i) {
    g.edges.emplace_back(i, i + 1);
    g.adjacency[static_cast<std::size_t>(i)].push_back(i + 1);
    g.adjacency[static_cast<std::size_t>(i + 1)].push_back(i);
  }
  for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());
  return g;
}

TEST(ExperimentOne, PaperDefaults) {
  const SyntheticSpec spec = SyntheticSpec::experiment1();
  EXPECT_EQ(spec.n, 1000);
  EXPECT_EQ(spec.m, 50);
  EXPECT_EQ(spec.m_redundant, 10);
  EXPECT_EQ(spec.k, 25);
  EXPECT_EQ(spec.k_null, 20);
  EXPECT_DOUBLE_EQ(spec.sigma_joint(0, 0), 3.000);
  EXPECT_DOUBLE_EQ(spec.sigma_joint(0, 1), -0.087);
  EXPECT_DOUBLE_EQ(spec.sigma_joint(1, 0), -0.087);
  EXPECT_DOUBLE_EQ(spec.sigma_joint(1, 1), 0.010);

  const SyntheticDraw draw = gen_experiment1(spec, SeededRng(1));
  EXPECT_EQ(draw.data.n(), 1000);
  EXPECT_EQ(draw.data.m(), 50);
  EXPECT_EQ(draw.data.k(), 25);
  EXPECT_EQ(draw.truth.params.alpha.tail(10), Vector::Zero(10));
  EXPECT_EQ(draw.truth.params.beta_x.tail(20), Vector::Zero(20));
  EXPECT_TRUE(draw.truth.params.alpha.head(40).cwiseAbs().minCoeff() > 0.0);
  EXPECT_DOUBLE_EQ(draw.truth.sigma_z(0, 1), 0.001);
  EXPECT_DOUBLE_EQ(draw.truth.sigma_z(3, 3), 1.0);
}

TEST(ExperimentOne, NoiselessIsReproducible) {
  SyntheticSpec spec = SyntheticSpec::experiment1();
  spec.n = 200;
  spec.sigma_joint = Matrix::Zero(2, 2);
  spec.sigma_eps = 0.0;
  spec.activation_g = ActivationKind::identity();
  spec.activation_f = ActivationKind::identity();
  const SyntheticDraw draw = gen_experiment1(spec, SeededRng(2));
  EXPECT_EQ(draw.truth.w, Vector::Zero(200));
  const auto [p, y] = recompute_outcomes(spec, draw.data.z(), draw.data.x(), draw.truth);
  EXPECT_EQ(p, draw.data.p());
  EXPECT_EQ(y, draw.data.y());
  const TrueParameters& t = draw.truth.params;
  const Vector latent = draw.data.p() * t.beta + draw.data.x() * t.beta_x;
  EXPECT_LT((latent - draw.data.y()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExperimentOne, JointNoiseCovariance) {
  SyntheticSpec spec = SyntheticSpec::experiment1();
  spec.n = 100000;
  spec.m = 1;
  spec.m_redundant = 0;
  spec.k = 0;
  spec.k_null = 0;
  const SyntheticDraw draw = gen_experiment1(spec, SeededRng(3));
  const double cov = center(draw.truth.w).dot(center(draw.truth.xi)) / (spec.n - 1.0);
  EXPECT_NEAR(cov, -0.087, 0.05 * 0.087);
  EXPECT_NEAR(center(draw.truth.w).squaredNorm() / (spec.n - 1.0), 3.0, 0.05);
}

TEST(ExperimentOne, CoefficientSeedIsShared) {
  SyntheticSpec spec = SyntheticSpec::experiment1();
  spec.n = 100;
  spec.coefficient_seed = 99;
  const SyntheticDraw a = gen_experiment1(spec, SeededRng(1));
  const SyntheticDraw b = gen_experiment1(spec, SeededRng(2));
  EXPECT_EQ(a.truth.params.alpha, b.truth.params.alpha);
  EXPECT_NE(a.data.z(), b.data.z());
  spec.coefficient_seed.reset();
  EXPECT_NE(gen_experiment1(spec, SeededRng(1)).truth.params.alpha,
            gen_experiment1(spec, SeededRng(2)).truth.params.alpha);
}

TEST(ExperimentOne, SameSeedSameData) {
  SyntheticSpec spec = SyntheticSpec::experiment1();
  spec.n = 150;
  const SyntheticDraw a = generate(spec, SeededRng(4));
  const SyntheticDraw b = generate(spec, SeededRng(4));
  EXPECT_EQ(a.data.z(), b.data.z());
  EXPECT_EQ(a.data.y(), b.data.y());
}

TEST(SyntheticSpec, Validation) {
  SyntheticSpec spec;
  spec.m_redundant = 60;
  EXPECT_THROW(spec.validate(), DataError);
  spec = SyntheticSpec{};
  spec.sigma_joint(0, 1) = 5.0;
  spec.sigma_joint(1, 0) = 5.0;
  EXPECT_THROW(spec.validate(), DataError);
  spec = SyntheticSpec::experiment2();
  spec.network_base = 1.5;
  EXPECT_THROW(spec.validate(), DataError);
  spec = SyntheticSpec{};
  spec.sigma_eps = -1.0;
  EXPECT_THROW(spec.validate(), DataError);
}

TEST(PreferentialAttachment, SmallTree) {
  SeededRng rng(1);
  const InstrumentGraph g = gen_preferential_attachment(3, 1, rng);
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_TRUE(shortest_path_matrix(g).allFinite());
}

TEST(PreferentialAttachment, EdgeCountAndSimplicity) {
  SeededRng rng(2);
  const InstrumentGraph g = gen_preferential_attachment(60, 2, rng);
  EXPECT_EQ(g.edges.size(), 3u + 57u * 2u);
  for (const auto& nb : g.adjacency) {
    EXPECT_TRUE(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
  }
  for (const auto& [a, b] : g.edges) EXPECT_LT(a, b);
}

TEST(PreferentialAttachment, HeavyTail) {
  int heavy = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeededRng rng(seed);
    const std::vector<Index> deg = gen_preferential_attachment(100, 1, rng).degrees();
    Vector d(static_cast<Index>(deg.size()));
    for (std::size_t i = 0; i < deg.size(); ++i) d(static_cast<Index>(i)) = static_cast<double>(deg[i]);
    heavy += d.maxCoeff() >= 3.0 * median(d);
  }
  EXPECT_GE(heavy, 8);
}

TEST(PreferentialAttachment, Deterministic) {
  SeededRng a(5), b(5);
  EXPECT_EQ(gen_preferential_attachment(50, 1, a).edges, gen_preferential_attachment(50, 1, b).edges);
}

TEST(ShortestPaths, PathGraph) {
  const Matrix d = shortest_path_matrix(path_graph(3));
  EXPECT_EQ(d(0, 2), 2.0);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(d(i, i), 0.0);
}

TEST(ShortestPaths, MatchesFloydWarshall) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SeededRng rng(40 + seed);
    const InstrumentGraph g = gen_preferential_attachment(50, 1 + seed % 2, rng);
    EXPECT_EQ(shortest_path_matrix(g), floyd_warshall(g));
  }
}

TEST(ShortestPaths, DisconnectedThrows) {
  InstrumentGraph g = path_graph(3);
  g.nodes = 4;
  g.adjacency.emplace_back();
  EXPECT_THROW(shortest_path_matrix(g), DataError);
}

TEST(DistanceToCov, AdjacentAndDiagonal) {
  const CovarianceRepair r = distance_to_cov(shortest_path_matrix(path_graph(2)), 0.7);
  EXPECT_DOUBLE_EQ(r.cov(0, 1), 0.7);
  EXPECT_DOUBLE_EQ(r.cov(0, 0), 1.0);
  EXPECT_EQ(r.max_change, 0.0);
}

TEST(DistanceToCov, RepairedGraphCovariance) {
  SeededRng rng(6);
  const Matrix d = shortest_path_matrix(gen_preferential_attachment(100, 1, rng));
  const CovarianceRepair r = distance_to_cov(d, 0.7);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.cov);
  EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
  for (Index i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(r.cov(i, i), 1.0);
  EXPECT_LE(r.max_change, 0.05);
  const Matrix raw = d.unaryExpr([](double v) { return std::pow(0.7, v); });
  EXPECT_NEAR((r.cov - raw).cwiseAbs().maxCoeff(), r.max_change, 1e-15);
}

TEST(ExperimentTwo, NetworkCorrelations) {
  SyntheticSpec spec = SyntheticSpec::experiment2();
  spec.n = 100000;
  spec.k = 0;
  spec.k_null = 0;
  EXPECT_EQ(spec.m, 50);
  const SyntheticDraw draw = gen_experiment2(spec, SeededRng(7));
  ASSERT_TRUE(draw.truth.graph.has_value());
  EXPECT_EQ(draw.truth.graph->nodes, 50);
  const Matrix d = shortest_path_matrix(*draw.truth.graph);
  const auto [a, b] = draw.truth.graph->edges.front();
  EXPECT_NEAR(correlation(draw.data.z().col(a), draw.data.z().col(b)), 0.7, 0.05);
  Index fi = -1, fj = -1;
  for (Index i = 0; i < 50 && fi < 0; ++i) {
    for (Index j = 0; j < 50; ++j) {
      if (d(i, j) == 8.0) {
        fi = i;
        fj = j;
        break;
      }
    }
  }
  ASSERT_GE(fi, 0) << "graph has no pair at distance 8";
  EXPECT_LE(std::abs(correlation(draw.data.z().col(fi), draw.data.z().col(fj))), 0.1);
}

TEST(ExperimentTwo, RequiresNetworkMode) {
  EXPECT_THROW(gen_experiment2(SyntheticSpec::experiment1(), SeededRng(1)), DataError);
}

TEST(SampleMvn, MatchesCovariance) {
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  SeededRng rng(8);
  const Matrix s = sample_mvn(cov, 50000, rng);
  const Matrix c = center_columns(s);
  const Matrix emp = c.transpose() * c / 49999.0;
  EXPECT_LT((emp - cov).cwiseAbs().maxCoeff(), 0.05);
}

}  // namespace
}  // namespace dpls
