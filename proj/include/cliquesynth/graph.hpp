#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cliquesynth {

/// Undirected simple graph on nodes 0..N-1.
///
/// Edges are stored unordered, so (i, j) is present iff (j, i) is. Self-loops
/// are rejected. Node indices are 0-based in the C++ API; the JSON instance
/// format uses 1-based indices (see io.hpp).
class Graph {
 public:
  explicit Graph(int node_count);
  Graph(int node_count, const std::vector<std::pair<int, int>>& edges);

  void add_edge(int i, int j);
  bool has_edge(int i, int j) const;

  int node_count() const { return node_count_; }
  int edge_count() const;

  /// Edges as (i, j) with i < j, sorted lexicographically.
  std::vector<std::pair<int, int>> edges() const;

  /// Sorted neighbour list of node i.
  std::vector<int> neighbors(int i) const;

  static Graph complete(int node_count);

 private:
  void check_node(int i) const;

  int node_count_;
  std::vector<std::vector<char>> adjacency_;
};

/// An ordered list of cliques together with the per-node membership sets
/// Q^i (indices of the cliques containing node i).
struct CliqueCover {
  std::vector<std::vector<int>> cliques;
  std::vector<std::vector<int>> membership;

  int size() const { return static_cast<int>(cliques.size()); }
};

/// Builds a cover from raw member lists. Members are sorted ascending inside
/// each clique; the clique order is kept as given.
CliqueCover make_cover(int node_count, std::vector<std::vector<int>> cliques);

/// All maximal cliques (pivoted Bron-Kerbosch). Isolated nodes give singleton
/// cliques. Cliques are sorted lexicographically by their ascending member
/// lists, so the result does not depend on edge insertion order.
CliqueCover maximal_cliques(const Graph& g);

/// Chordality via maximum-cardinality search followed by a perfect
/// elimination ordering check.
bool is_chordal(const Graph& g);

/// True iff every clique of the cover induces a complete subgraph of g.
bool cliques_are_complete(const Graph& g, const CliqueCover& cover);

/// Cover condition: every node lies in some clique, and two distinct nodes share
/// a clique exactly when they are adjacent.
bool verify_assumption1(const Graph& g, const CliqueCover& cover);

/// |Q^i| for every node. Throws UncoveredNodesError if some node is in no
/// clique.
std::vector<int> membership_counts(const CliqueCover& cover, int node_count);

class UncoveredNodesError : public std::runtime_error {
 public:
  explicit UncoveredNodesError(std::vector<int> nodes);
  const std::vector<int>& nodes() const { return nodes_; }

 private:
  std::vector<int> nodes_;
};

struct DiskGraph {
  Graph graph;
  std::vector<Eigen::Vector2d> positions;
};

/// Random geometric graph: n points uniform in the unit square, an edge
/// whenever two points are within `radius` (inclusive).
DiskGraph disk_graph(int n, double radius, std::mt19937_64& rng);
DiskGraph disk_graph(int n, double radius, std::uint64_t seed);

/// Edge set of points at pairwise distance <= radius.
Graph graph_from_positions(const std::vector<Eigen::Vector2d>& positions,
                           double radius);

}  // namespace cliquesynth
