#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliquesynth/graph.hpp"

namespace cliquesynth {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Per-subsystem state and input block sizes.
struct BlockStructure {
  std::vector<int> n_sizes;
  std::vector<int> m_sizes;

  static BlockStructure uniform(int nodes, int size = 1) {
    return BlockStructure{std::vector<int>(nodes, size),
                          std::vector<int>(nodes, size)};
  }

  int nodes() const { return static_cast<int>(n_sizes.size()); }
  int n() const { return std::accumulate(n_sizes.begin(), n_sizes.end(), 0); }
  int m() const { return std::accumulate(m_sizes.begin(), m_sizes.end(), 0); }

  std::vector<int> state_offsets() const { return offsets(n_sizes); }
  std::vector<int> input_offsets() const { return offsets(m_sizes); }

  bool square_blocks() const { return n_sizes == m_sizes; }

  void validate() const {
    if (n_sizes.empty() || n_sizes.size() != m_sizes.size()) {
      throw std::invalid_argument(
          "BlockStructure: n_sizes and m_sizes must be non-empty and equally "
          "long");
    }
    for (std::size_t i = 0; i < n_sizes.size(); ++i) {
      if (n_sizes[i] < 1 || m_sizes[i] < 1) {
        throw std::invalid_argument("BlockStructure: block sizes must be >= 1");
      }
    }
  }

  /// Synthesis needs n_i = m_i for every subsystem.
  void require_square_blocks() const {
    validate();
    if (!square_blocks()) {
      throw std::invalid_argument(
          "BlockStructure: synthesis requires n_i == m_i for every node");
    }
  }

 private:
  static std::vector<int> offsets(const std::vector<int>& sizes) {
    std::vector<int> out(sizes.size() + 1, 0);
    std::partial_sum(sizes.begin(), sizes.end(), out.begin() + 1);
    return out;
  }
};

/// Allowed (i, j) blocks of a structured gain: the diagonal plus graph edges.
struct SparsityPattern {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> allowed;

  static SparsityPattern from_graph(const Graph& g) {
    const int n = g.node_count();
    SparsityPattern p;
    p.allowed.setConstant(n, n, false);
    for (int i = 0; i < n; ++i) {
      p.allowed(i, i) = true;
      for (int j = 0; j < n; ++j)
        if (i != j && g.has_edge(i, j)) p.allowed(i, j) = true;
    }
    return p;
  }

  static SparsityPattern dense(int nodes) {
    SparsityPattern p;
    p.allowed.setConstant(nodes, nodes, true);
    return p;
  }

  static SparsityPattern diagonal(int nodes) {
    SparsityPattern p;
    p.allowed.setConstant(nodes, nodes, false);
    for (int i = 0; i < nodes; ++i) p.allowed(i, i) = true;
    return p;
  }

  int nodes() const { return static_cast<int>(allowed.rows()); }
};

/// Clique lifting data: E stacks the clique selectors, D = EᵀE is diagonal
/// with |Q^i| repeated n_i times, N = I − E D⁻¹ Eᵀ projects onto null(Eᵀ)
/// and M = blkdiag(N, N).
template <typename Scalar>
struct LiftedBasisT {
  MatrixX<Scalar> E;
  MatrixX<Scalar> N;
  MatrixX<Scalar> M;
  /// Diagonal of EᵀE, one entry per state coordinate.
  VectorX<Scalar> de_diag;
  /// Row offsets of each clique block in the lifted space (size q + 1).
  std::vector<int> clique_offsets;
  /// Lifted block size of each clique.
  std::vector<int> clique_sizes;
  /// State coordinate selected by each lifted row.
  std::vector<int> row_to_state;
  /// Node owning each lifted row.
  std::vector<int> row_to_node;
  /// |Q^i| per node.
  std::vector<int> multiplicity;

  int lifted_dim() const { return static_cast<int>(E.rows()); }
  int state_dim() const { return static_cast<int>(E.cols()); }
  int clique_count() const { return static_cast<int>(clique_sizes.size()); }

  MatrixX<Scalar> de() const { return de_diag.asDiagonal(); }
  /// Orthonormal basis of range(E): V = E D^{-1/2}.
  MatrixX<Scalar> range_basis() const {
    return E * de_diag.cwiseSqrt().cwiseInverse().asDiagonal();
  }
};
using LiftedBasis = LiftedBasisT<double>;

/// Builds E in cover order, nodes ascending inside each clique. Only the
/// coverage half of the cover condition can be checked without the graph; use the
/// three-argument overload to check both halves.
template <typename Scalar = double>
LiftedBasisT<Scalar> build_lifted_basis(const BlockStructure& structure,
                                        const CliqueCover& cover) {
  structure.validate();
  const int nodes = structure.nodes();
  const std::vector<int> counts = membership_counts(cover, nodes);
  const std::vector<int> offsets = structure.state_offsets();
  const int n = structure.n();

  LiftedBasisT<Scalar> basis;
  basis.multiplicity = counts;
  basis.clique_offsets.push_back(0);
  for (const auto& clique : cover.cliques) {
    int size = 0;
    for (int v : clique) size += structure.n_sizes[v];
    basis.clique_sizes.push_back(size);
    basis.clique_offsets.push_back(basis.clique_offsets.back() + size);
  }
  const int lifted = basis.clique_offsets.back();
  basis.E = MatrixX<Scalar>::Zero(lifted, n);
  int row = 0;
  for (const auto& clique : cover.cliques) {
    for (int v : clique) {
      for (int a = 0; a < structure.n_sizes[v]; ++a) {
        basis.E(row, offsets[v] + a) = Scalar(1);
        basis.row_to_state.push_back(offsets[v] + a);
        basis.row_to_node.push_back(v);
        ++row;
      }
    }
  }
  basis.de_diag.resize(n);
  for (int v = 0; v < nodes; ++v)
    for (int a = 0; a < structure.n_sizes[v]; ++a)
      basis.de_diag(offsets[v] + a) = Scalar(counts[v]);

  basis.N = MatrixX<Scalar>::Identity(lifted, lifted) -
            basis.E * basis.de_diag.cwiseInverse().asDiagonal() *
                basis.E.transpose();
  basis.M = MatrixX<Scalar>::Zero(2 * lifted, 2 * lifted);
  basis.M.topLeftCorner(lifted, lifted) = basis.N;
  basis.M.bottomRightCorner(lifted, lifted) = basis.N;
  return basis;
}

template <typename Scalar = double>
LiftedBasisT<Scalar> build_lifted_basis(const BlockStructure& structure,
                                        const Graph& graph,
                                        const CliqueCover& cover) {
  if (!cliques_are_complete(graph, cover)) {
    throw std::invalid_argument(
        "build_lifted_basis: cover contains a non-clique");
  }
  if (!verify_assumption1(graph, cover)) {
    throw std::invalid_argument(
        "build_lifted_basis: cover does not match the graph");
  }
  return build_lifted_basis<Scalar>(structure, cover);
}

/// (A, B, Bv, C, D, Dw) of x⁺ = Ax + Bu + Bv v, y = Cx + Du + Dw v.
template <typename Scalar>
struct PlantT {
  MatrixX<Scalar> A, B, Bv, C, D, Dw;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int mv() const { return static_cast<int>(Bv.cols()); }
  int l() const { return static_cast<int>(C.rows()); }

  /// Throws std::invalid_argument on inconsistent shapes. The H∞ blocks
  /// (Bv, C, D, Dw) may all be empty for stabilization-only use.
  void validate(bool require_hinf = false) const {
    const auto fail = [](const std::string& what) {
      throw std::invalid_argument("Plant: " + what);
    };
    if (A.rows() != A.cols() || A.rows() == 0) fail("A must be square");
    if (B.rows() != A.rows()) fail("B rows must match A");
    const bool has_hinf = Bv.size() > 0 || C.size() > 0 || D.size() > 0 ||
                          Dw.size() > 0;
    if (!has_hinf && !require_hinf) return;
    if (Bv.rows() != A.rows() || Bv.cols() == 0) fail("Bv must be n x m_v");
    if (C.cols() != A.rows() || C.rows() == 0) fail("C must be l x n");
    if (D.rows() != C.rows() || D.cols() != B.cols()) fail("D must be l x m");
    if (Dw.rows() != C.rows() || Dw.cols() != Bv.cols()) {
      fail("Dw must be l x m_v");
    }
  }

  bool has_hinf_channels() const { return Bv.size() > 0 && C.size() > 0; }
};
using Plant = PlantT<double>;

/// Plant matrices in lifted coordinates.
template <typename Scalar>
struct DilatedPlantT {
  MatrixX<Scalar> A_til, B_til, Bv_til, C_til, D_til, Dw;
};
using DilatedPlant = DilatedPlantT<double>;

/// Ã = E A D⁻¹ Eᵀ, B̃ = E B D⁻¹ Eᵀ, B̃v = E Bv, C̃ = C D⁻¹ Eᵀ, D̃ = D D⁻¹ Eᵀ.
/// D⁻¹ is applied as a diagonal reciprocal scaling.
template <typename Scalar>
DilatedPlantT<Scalar> dilate_plant(const PlantT<Scalar>& p,
                                   const LiftedBasisT<Scalar>& basis) {
  const int n = basis.state_dim();
  if (p.A.rows() != n || p.B.rows() != n || p.B.cols() != n) {
    throw std::invalid_argument(
        "dilate_plant: A and B must be n x n with n = state dimension of E");
  }
  const auto de_inv = basis.de_diag.cwiseInverse().asDiagonal();
  const MatrixX<Scalar> right = de_inv * basis.E.transpose();
  DilatedPlantT<Scalar> out;
  out.A_til = basis.E * p.A * right;
  out.B_til = basis.E * p.B * right;
  if (p.Bv.size() > 0) {
    if (p.Bv.rows() != n) throw std::invalid_argument("dilate_plant: Bv rows");
    out.Bv_til = basis.E * p.Bv;
  }
  if (p.C.size() > 0) {
    if (p.C.cols() != n) throw std::invalid_argument("dilate_plant: C cols");
    out.C_til = p.C * right;
  }
  if (p.D.size() > 0) {
    if (p.D.cols() != n) throw std::invalid_argument("dilate_plant: D cols");
    out.D_til = p.D * right;
  }
  out.Dw = p.Dw;
  return out;
}

/// Raised by recover_gain when a clique block of G̃ is (numerically) singular.
class SingularBlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverts a clique-block-diagonal lifted matrix block by block. Throws
/// SingularBlockError when a block's reciprocal condition estimate falls
/// below `rcond_min`.
template <typename Scalar>
MatrixX<Scalar> invert_clique_blocks(const MatrixX<Scalar>& blocks,
                                     const LiftedBasisT<Scalar>& basis,
                                     double rcond_min = 1e-12) {
  const int lifted = basis.lifted_dim();
  if (blocks.rows() != lifted || blocks.cols() != lifted) {
    throw std::invalid_argument("invert_clique_blocks: shape mismatch");
  }
  MatrixX<Scalar> inv = MatrixX<Scalar>::Zero(lifted, lifted);
  for (int k = 0; k < basis.clique_count(); ++k) {
    const int o = basis.clique_offsets[k];
    const int s = basis.clique_sizes[k];
    Eigen::PartialPivLU<MatrixX<Scalar>> lu(blocks.block(o, o, s, s));
    const double rcond = static_cast<double>(lu.rcond());
    if (!(rcond >= rcond_min)) {
      throw SingularBlockError("clique block " + std::to_string(k) +
                               " is singular (rcond " + std::to_string(rcond) +
                               ")");
    }
    inv.block(o, o, s, s) = lu.inverse();
  }
  return inv;
}

/// K = (EᵀE)⁻¹ Eᵀ Z̃ G̃⁻¹ E for clique-block-diagonal Z̃, G̃.
template <typename Scalar>
MatrixX<Scalar> recover_gain(const MatrixX<Scalar>& Z_til,
                             const MatrixX<Scalar>& G_til,
                             const LiftedBasisT<Scalar>& basis,
                             double rcond_min = 1e-12) {
  const MatrixX<Scalar> G_inv = invert_clique_blocks(G_til, basis, rcond_min);
  if (Z_til.rows() != basis.lifted_dim() || Z_til.cols() != basis.lifted_dim()) {
    throw std::invalid_argument("recover_gain: Z_til shape mismatch");
  }
  return basis.de_diag.cwiseInverse().asDiagonal() *
         (basis.E.transpose() * Z_til * G_inv * basis.E);
}

/// Max-abs entry of K over the blocks the pattern forbids.
template <typename Derived>
double off_pattern_max(const Eigen::MatrixBase<Derived>& K,
                       const SparsityPattern& pattern,
                       const BlockStructure& structure) {
  const auto ro = structure.input_offsets();
  const auto co = structure.state_offsets();
  double worst = 0.0;
  for (int i = 0; i < structure.nodes(); ++i) {
    for (int j = 0; j < structure.nodes(); ++j) {
      if (pattern.allowed(i, j)) continue;
      const double v = static_cast<double>(
          K.block(ro[i], co[j], structure.m_sizes[i], structure.n_sizes[j])
              .cwiseAbs()
              .maxCoeff());
      worst = std::max(worst, v);
    }
  }
  return worst;
}

/// True iff every forbidden block has max-abs entry <= rel_tol·max(1, ‖K‖max).
template <typename Derived>
bool pattern_test(const Eigen::MatrixBase<Derived>& K,
                  const SparsityPattern& pattern,
                  const BlockStructure& structure, double rel_tol) {
  if (K.rows() != structure.m() || K.cols() != structure.n()) {
    throw std::invalid_argument("pattern_test: K must be m x n");
  }
  if (pattern.nodes() != structure.nodes()) {
    throw std::invalid_argument("pattern_test: pattern size mismatch");
  }
  const double scale =
      std::max(1.0, K.size() ? static_cast<double>(K.cwiseAbs().maxCoeff())
                             : 0.0);
  return off_pattern_max(K, pattern, structure) <= rel_tol * scale;
}

/// Block-diagonal K̃ with Eᵀ K̃ E = K. Each allowed block K_ij is copied,
/// unscaled, into the first clique (cover order) containing both i and j.
/// Throws std::invalid_argument if a nonzero block has no covering clique.
template <typename Scalar>
MatrixX<Scalar> sparse_factorize(const MatrixX<Scalar>& K,
                                 const BlockStructure& structure,
                                 const CliqueCover& cover,
                                 const LiftedBasisT<Scalar>& basis) {
  if (!structure.square_blocks()) {
    throw std::invalid_argument("sparse_factorize: needs n_i == m_i");
  }
  const int n = structure.n();
  if (K.rows() != n || K.cols() != n) {
    throw std::invalid_argument("sparse_factorize: K must be n x n");
  }
  const auto off = structure.state_offsets();
  const int nodes = structure.nodes();
  // Position of node v's block inside clique k (lifted row offset).
  auto local_offset = [&](int k, int v) {
    int o = basis.clique_offsets[k];
    for (int u : cover.cliques[k]) {
      if (u == v) return o;
      o += structure.n_sizes[u];
    }
    return -1;
  };
  MatrixX<Scalar> K_til = MatrixX<Scalar>::Zero(basis.lifted_dim(),
                                                basis.lifted_dim());
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      const auto blk =
          K.block(off[i], off[j], structure.n_sizes[i], structure.n_sizes[j]);
      int owner = -1;
      for (int k : cover.membership[i]) {
        const auto& c = cover.cliques[k];
        if (std::find(c.begin(), c.end(), j) != c.end()) {
          owner = k;
          break;
        }
      }
      if (owner < 0) {
        if ((blk.array() != Scalar(0)).any()) {
          throw std::invalid_argument(
              "sparse_factorize: block (" + std::to_string(i) + ", " +
              std::to_string(j) + ") is nonzero but no clique covers it");
        }
        continue;
      }
      K_til.block(local_offset(owner, i), local_offset(owner, j),
                  structure.n_sizes[i], structure.n_sizes[j]) = blk;
    }
  }
  return K_til;
}

/// G̃ with clique blocks blkdiag(…, |Q^j| G_j, …) built from a node-block-
/// diagonal G. Satisfies G̃⁻¹E = E (EᵀE)⁻¹ G⁻¹.
template <typename Scalar>
MatrixX<Scalar> lift_node_block_diagonal(const MatrixX<Scalar>& G,
                                         const BlockStructure& structure,
                                         const CliqueCover& cover,
                                         const LiftedBasisT<Scalar>& basis) {
  const auto off = structure.state_offsets();
  MatrixX<Scalar> G_til =
      MatrixX<Scalar>::Zero(basis.lifted_dim(), basis.lifted_dim());
  for (int k = 0; k < basis.clique_count(); ++k) {
    int o = basis.clique_offsets[k];
    for (int v : cover.cliques[k]) {
      const int s = structure.n_sizes[v];
      G_til.block(o, o, s, s) =
          Scalar(basis.multiplicity[v]) * G.block(off[v], off[v], s, s);
      o += s;
    }
  }
  return G_til;
}

/// Zeroes every off-clique-block entry of a lifted matrix.
template <typename Scalar>
MatrixX<Scalar> clique_block_part(const MatrixX<Scalar>& X,
                                  const LiftedBasisT<Scalar>& basis) {
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(X.rows(), X.cols());
  for (int k = 0; k < basis.clique_count(); ++k) {
    const int o = basis.clique_offsets[k];
    const int s = basis.clique_sizes[k];
    out.block(o, o, s, s) = X.block(o, o, s, s);
  }
  return out;
}

}  // namespace cliquesynth
