#include <random>

#include <gtest/gtest.h>

#include "cliquesynth/graph.hpp"
#include "cliquesynth/lifting.hpp"

using namespace cliquesynth;
using Eigen::MatrixXd;

namespace {

const Graph kPath(3, {{0, 1}, {1, 2}});

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

BlockStructure random_structure(int nodes, int max_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, max_size);
  BlockStructure s;
  for (int i = 0; i < nodes; ++i) {
    const int k = size(rng);
    s.n_sizes.push_back(k);
    s.m_sizes.push_back(k);
  }
  return s;
}

Graph random_graph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  Graph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng)) g.add_edge(i, j);
  return g;
}

// Random matrix supported on the allowed blocks of the graph pattern.
MatrixXd random_patterned(const BlockStructure& s, const Graph& g,
                          std::mt19937_64& rng) {
  MatrixXd K = random_matrix(s.m(), s.n(), rng);
  const auto ro = s.input_offsets();
  const auto co = s.state_offsets();
  for (int i = 0; i < s.nodes(); ++i)
    for (int j = 0; j < s.nodes(); ++j)
      if (i != j && !g.has_edge(i, j))
        K.block(ro[i], co[j], s.m_sizes[i], s.n_sizes[j]).setZero();
  return K;
}

}  // namespace

TEST(LiftedBasis, PathExample) {
  const LiftedBasis b =
      build_lifted_basis<double>(BlockStructure::uniform(3), kPath, maximal_cliques(kPath));
  MatrixXd E(4, 3);
  E << 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1;
  EXPECT_EQ(b.E, E);
  EXPECT_EQ(MatrixXd(b.E.transpose() * b.E), MatrixXd(Eigen::Vector3d(1, 2, 1).asDiagonal()));
  EXPECT_EQ(b.de_diag, Eigen::Vector3d(1, 2, 1));
  EXPECT_EQ(b.clique_offsets, (std::vector<int>{0, 2, 4}));
}

TEST(LiftedBasis, SingleCliqueIsIdentity) {
  const Graph g = Graph::complete(4);
  const LiftedBasis b = build_lifted_basis<double>(BlockStructure::uniform(4), g,
                                                   maximal_cliques(g));
  EXPECT_EQ(b.E, MatrixXd::Identity(4, 4));
  EXPECT_EQ(b.N, MatrixXd::Zero(4, 4));
  EXPECT_EQ(b.M, MatrixXd::Zero(8, 8));
}

TEST(LiftedBasis, InvariantsOnRandomGraphs) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    const int nodes = 2 + trial % 9;
    const BlockStructure s = random_structure(nodes, 3, rng);
    const Graph g = random_graph(nodes, 0.45, rng);
    const CliqueCover c = maximal_cliques(g);
    const LiftedBasis b = build_lifted_basis<double>(s, g, c);
    for (int r = 0; r < b.lifted_dim(); ++r) {
      EXPECT_EQ(b.E.row(r).sum(), 1.0);
      EXPECT_EQ(b.E.row(r).maxCoeff(), 1.0);
    }
    Eigen::FullPivLU<MatrixXd> lu(b.E);
    EXPECT_EQ(lu.rank(), s.n());
    const MatrixXd I = MatrixXd::Identity(b.lifted_dim(), b.lifted_dim());
    EXPECT_LE((b.N * b.N - b.N).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((b.N - b.N.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((b.N * b.E).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((b.M * b.M - b.M).cwiseAbs().maxCoeff(), 1e-12);
    // The range basis is orthonormal and spans range(E).
    const MatrixXd V = b.range_basis();
    EXPECT_LE((V.transpose() * V - MatrixXd::Identity(s.n(), s.n())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((V * V.transpose() + b.N - I).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LiftedBasis, RejectsCoversThatDoNotMatchGraph) {
  const BlockStructure s = BlockStructure::uniform(3);
  EXPECT_THROW(build_lifted_basis<double>(s, kPath, make_cover(3, {{0, 1}})),
               std::invalid_argument);
  EXPECT_THROW(build_lifted_basis<double>(s, make_cover(3, {{0, 1}})),
               UncoveredNodesError);
  EXPECT_THROW(build_lifted_basis<double>(s, Graph::complete(3),
                                          make_cover(3, {{0, 1}, {1, 2}})),
               std::invalid_argument);
}

TEST(DilatePlant, SingleCliqueIsUnchanged) {
  std::mt19937_64 rng(2);
  const Graph g = Graph::complete(3);
  const LiftedBasis b =
      build_lifted_basis<double>(BlockStructure::uniform(3), g, maximal_cliques(g));
  Plant p;
  p.A = random_matrix(3, 3, rng);
  p.B = random_matrix(3, 3, rng);
  const DilatedPlant d = dilate_plant(p, b);
  EXPECT_EQ(d.A_til, p.A);
  EXPECT_EQ(d.B_til, p.B);
}

TEST(DilatePlant, PathAgainstDenseOracle) {
  const LiftedBasis b =
      build_lifted_basis<double>(BlockStructure::uniform(3), kPath, maximal_cliques(kPath));
  Plant p;
  p.A = Eigen::Vector3d(1, 2, 3).asDiagonal();
  p.B = MatrixXd::Identity(3, 3);
  p.Bv = MatrixXd::Ones(3, 2);
  p.C = MatrixXd::Ones(1, 3);
  p.D = MatrixXd::Ones(1, 3);
  p.Dw = MatrixXd::Zero(1, 2);
  MatrixXd E(4, 3);
  E << 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1;
  const MatrixXd dinv = (E.transpose() * E).inverse();
  const DilatedPlant d = dilate_plant(p, b);
  EXPECT_LE((d.A_til - E * p.A * dinv * E.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((d.B_til - E * p.B * dinv * E.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((d.Bv_til - E * p.Bv).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((d.C_til - p.C * dinv * E.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((d.D_til - p.D * dinv * E.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  // Hand value: middle state splits across two lifted rows with weight 1/2.
  MatrixXd A_hand(4, 4);
  A_hand << 1, 0, 0, 0,
            0, 1, 1, 0,
            0, 1, 1, 0,
            0, 0, 0, 3;
  EXPECT_LE((d.A_til - A_hand).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DilatePlant, CompressionRecoversA) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockStructure s = random_structure(6, 2, rng);
    const Graph g = random_graph(6, 0.5, rng);
    const LiftedBasis b = build_lifted_basis<double>(s, g, maximal_cliques(g));
    Plant p;
    p.A = random_matrix(s.n(), s.n(), rng);
    p.B = random_matrix(s.n(), s.m(), rng);
    const DilatedPlant d = dilate_plant(p, b);
    const MatrixXd dinv = b.de_diag.cwiseInverse().asDiagonal();
    EXPECT_LE((dinv * b.E.transpose() * d.A_til * b.E - p.A).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RecoverGain, IdentityAndZero) {
  const LiftedBasis b =
      build_lifted_basis<double>(BlockStructure::uniform(3), kPath, maximal_cliques(kPath));
  const MatrixXd I = MatrixXd::Identity(4, 4);
  EXPECT_LE((recover_gain<double>(I, I, b) - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(recover_gain<double>(MatrixXd::Zero(4, 4), I, b), MatrixXd::Zero(3, 3));
}

TEST(RecoverGain, RandomBlocksRespectPattern) {
  std::mt19937_64 rng(4);
  const BlockStructure s = BlockStructure::uniform(3);
  const LiftedBasis b = build_lifted_basis<double>(s, kPath, maximal_cliques(kPath));
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd Z = clique_block_part<double>(random_matrix(4, 4, rng), b);
    MatrixXd G = clique_block_part<double>(random_matrix(4, 4, rng), b);
    G += 3.0 * MatrixXd::Identity(4, 4);
    const MatrixXd K = recover_gain<double>(Z, G, b);
    // Dense reference evaluation.
    const MatrixXd Kref = (b.E.transpose() * b.E).inverse() * b.E.transpose() * Z *
                          G.inverse() * b.E;
    EXPECT_LE((K - Kref).cwiseAbs().maxCoeff(), 1e-12 * Kref.cwiseAbs().maxCoeff());
    EXPECT_LE(std::abs(K(0, 2)), 1e-12 * K.cwiseAbs().maxCoeff());
    EXPECT_LE(std::abs(K(2, 0)), 1e-12 * K.cwiseAbs().maxCoeff());
    EXPECT_TRUE(pattern_test(K, SparsityPattern::from_graph(kPath), s, 1e-8));
    // Joint scaling leaves K unchanged.
    const MatrixXd K2 = recover_gain<double>(MatrixXd(-2.5 * Z), MatrixXd(-2.5 * G), b);
    EXPECT_LE((K2 - K).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, K.cwiseAbs().maxCoeff()));
  }
}

TEST(RecoverGain, SingularBlockIsReported) {
  const LiftedBasis b =
      build_lifted_basis<double>(BlockStructure::uniform(3), kPath, maximal_cliques(kPath));
  MatrixXd G = MatrixXd::Identity(4, 4);
  G.block(0, 0, 2, 2) << 1, 1, 1, 1;
  EXPECT_THROW(recover_gain<double>(MatrixXd::Identity(4, 4), G, b), SingularBlockError);
}

TEST(LiftNodeBlockDiagonal, InverseIdentity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockStructure s = random_structure(7, 3, rng);
    const Graph g = random_graph(7, 0.5, rng);
    const CliqueCover c = maximal_cliques(g);
    const LiftedBasis b = build_lifted_basis<double>(s, g, c);
    MatrixXd G = MatrixXd::Zero(s.n(), s.n());
    const auto off = s.state_offsets();
    for (int i = 0; i < 7; ++i)
      G.block(off[i], off[i], s.n_sizes[i], s.n_sizes[i]) =
          random_matrix(s.n_sizes[i], s.n_sizes[i], rng) +
          4.0 * MatrixXd::Identity(s.n_sizes[i], s.n_sizes[i]);
    const MatrixXd Gt = lift_node_block_diagonal<double>(G, s, c, b);
    const MatrixXd lhs = Gt.inverse() * b.E;
    const MatrixXd rhs = b.E * b.de_diag.cwiseInverse().asDiagonal() * G.inverse();
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PatternTest, Basics) {
  std::mt19937_64 rng(6);
  const BlockStructure s = BlockStructure::uniform(3);
  const SparsityPattern p = SparsityPattern::from_graph(kPath);
  EXPECT_TRUE(pattern_test(MatrixXd::Zero(3, 3), p, s, 1e-8));
  EXPECT_FALSE(pattern_test(random_matrix(3, 3, rng), p, s, 1e-8));
  MatrixXd K = MatrixXd::Identity(3, 3);
  K(0, 2) = 1e-9;
  EXPECT_TRUE(pattern_test(K, p, s, 1e-8));
  K(0, 2) = 1e-7;
  EXPECT_FALSE(pattern_test(K, p, s, 1e-8));
  EXPECT_DOUBLE_EQ(off_pattern_max(K, p, s), 1e-7);
}

TEST(SparseFactorize, DiagonalOnPath) {
  const BlockStructure s = BlockStructure::uniform(3);
  const CliqueCover c = maximal_cliques(kPath);
  const LiftedBasis b = build_lifted_basis<double>(s, kPath, c);
  const MatrixXd K = Eigen::Vector3d(2, 3, 5).asDiagonal();
  const MatrixXd Kt = sparse_factorize<double>(K, s, c, b);
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect(0, 0) = 2;  // K_11 in clique {1,2}
  expect(1, 1) = 3;  // K_22 in clique {1,2}, first covering clique
  expect(3, 3) = 5;  // K_33 in clique {2,3}
  EXPECT_EQ(Kt, expect);
  EXPECT_EQ(MatrixXd(b.E.transpose() * Kt * b.E), K);
  EXPECT_EQ(sparse_factorize<double>(MatrixXd::Zero(3, 3), s, c, b), MatrixXd::Zero(4, 4));
}

TEST(SparseFactorize, RejectsOffPattern) {
  const BlockStructure s = BlockStructure::uniform(3);
  const CliqueCover c = maximal_cliques(kPath);
  const LiftedBasis b = build_lifted_basis<double>(s, kPath, c);
  MatrixXd K = MatrixXd::Zero(3, 3);
  K(0, 2) = 1.0;
  EXPECT_THROW(sparse_factorize<double>(K, s, c, b), std::invalid_argument);
}

TEST(SparseFactorize, RoundTripOnRandomGraphs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockStructure s = random_structure(8, 3, rng);
    const Graph g = random_graph(8, 0.4, rng);
    const CliqueCover c = maximal_cliques(g);
    const LiftedBasis b = build_lifted_basis<double>(s, g, c);
    const MatrixXd K = random_patterned(s, g, rng);
    const MatrixXd Kt = sparse_factorize<double>(K, s, c, b);
    EXPECT_EQ(clique_block_part<double>(Kt, b), Kt);
    EXPECT_LE((b.E.transpose() * Kt * b.E - K).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(BlockDiagonalCompression, PositiveDefiniteAndPatterned) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const BlockStructure s = random_structure(7, 2, rng);
    const Graph g = random_graph(7, 0.4, rng);
    const LiftedBasis b = build_lifted_basis<double>(s, g, maximal_cliques(g));
    MatrixXd P = clique_block_part<double>(random_matrix(b.lifted_dim(), b.lifted_dim(), rng), b);
    P = clique_block_part<double>(MatrixXd(P * P.transpose()), b);
    P.diagonal().array() += 1e-3;
    const MatrixXd X = b.E.transpose() * P * b.E;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(X);
    EXPECT_GT(es.eigenvalues()(0), 0.0);
    EXPECT_TRUE(pattern_test(X, SparsityPattern::from_graph(g), s, 1e-12));
  }
}

TEST(BlockStructure, Validation) {
  EXPECT_THROW((BlockStructure{{}, {}}).validate(), std::invalid_argument);
  EXPECT_THROW((BlockStructure{{1, 0}, {1, 1}}).validate(), std::invalid_argument);
  EXPECT_THROW((BlockStructure{{1, 2}, {1, 1}}).require_square_blocks(), std::invalid_argument);
  const BlockStructure s{{1, 2, 3}, {1, 2, 3}};
  EXPECT_EQ(s.n(), 6);
  EXPECT_EQ(s.state_offsets(), (std::vector<int>{0, 1, 3, 6}));
}
