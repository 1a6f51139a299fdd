#include "cliquesynth/graph.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace cliquesynth {

Graph::Graph(int node_count) : node_count_(node_count) {
  if (node_count < 1) {
    throw std::invalid_argument("Graph: node_count must be positive");
  }
  adjacency_.assign(node_count, std::vector<char>(node_count, 0));
}

Graph::Graph(int node_count, const std::vector<std::pair<int, int>>& edges)
    : Graph(node_count) {
  for (const auto& [i, j] : edges) add_edge(i, j);
}

void Graph::check_node(int i) const {
  if (i < 0 || i >= node_count_) {
    throw std::out_of_range("Graph: node index " + std::to_string(i) +
                            " out of range");
  }
}

void Graph::add_edge(int i, int j) {
  check_node(i);
  check_node(j);
  if (i == j) throw std::invalid_argument("Graph: self-loops are not allowed");
  adjacency_[i][j] = 1;
  adjacency_[j][i] = 1;
}

bool Graph::has_edge(int i, int j) const {
  check_node(i);
  check_node(j);
  return adjacency_[i][j] != 0;
}

int Graph::edge_count() const {
  int count = 0;
  for (int i = 0; i < node_count_; ++i)
    for (int j = i + 1; j < node_count_; ++j) count += adjacency_[i][j];
  return count;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < node_count_; ++i)
    for (int j = i + 1; j < node_count_; ++j)
      if (adjacency_[i][j]) out.emplace_back(i, j);
  return out;
}

std::vector<int> Graph::neighbors(int i) const {
  check_node(i);
  std::vector<int> out;
  for (int j = 0; j < node_count_; ++j)
    if (adjacency_[i][j]) out.push_back(j);
  return out;
}

Graph Graph::complete(int node_count) {
  Graph g(node_count);
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j) g.add_edge(i, j);
  return g;
}

CliqueCover make_cover(int node_count, std::vector<std::vector<int>> cliques) {
  CliqueCover cover;
  cover.membership.assign(node_count, {});
  for (auto& clique : cliques) {
    if (clique.empty()) throw std::invalid_argument("make_cover: empty clique");
    std::sort(clique.begin(), clique.end());
    if (std::adjacent_find(clique.begin(), clique.end()) != clique.end()) {
      throw std::invalid_argument("make_cover: repeated node in clique");
    }
    for (int v : clique) {
      if (v < 0 || v >= node_count) {
        throw std::out_of_range("make_cover: node index out of range");
      }
    }
  }
  cover.cliques = std::move(cliques);
  for (int k = 0; k < cover.size(); ++k)
    for (int v : cover.cliques[k]) cover.membership[v].push_back(k);
  return cover;
}

namespace {

// Tomita-style pivoting: pick the pivot in P ∪ X with the most neighbours in P.
void bron_kerbosch(const Graph& g, std::vector<int>& r, std::vector<int> p,
                   std::vector<int> x, std::vector<std::vector<int>>& out) {
  if (p.empty() && x.empty()) {
    out.push_back(r);
    return;
  }
  int pivot = -1;
  int best = -1;
  for (const auto* set : {&p, &x}) {
    for (int u : *set) {
      int count = 0;
      for (int v : p) count += g.has_edge(u, v) ? 1 : 0;
      if (count > best) {
        best = count;
        pivot = u;
      }
    }
  }
  std::vector<int> candidates;
  for (int v : p)
    if (!g.has_edge(pivot, v)) candidates.push_back(v);

  for (int v : candidates) {
    std::vector<int> p_next, x_next;
    for (int u : p)
      if (g.has_edge(v, u)) p_next.push_back(u);
    for (int u : x)
      if (g.has_edge(v, u)) x_next.push_back(u);
    r.push_back(v);
    bron_kerbosch(g, r, std::move(p_next), std::move(x_next), out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

}  // namespace

CliqueCover maximal_cliques(const Graph& g) {
  std::vector<std::vector<int>> cliques;
  std::vector<int> r;
  std::vector<int> p(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) p[i] = i;
  bron_kerbosch(g, r, std::move(p), {}, cliques);
  for (auto& c : cliques) std::sort(c.begin(), c.end());
  std::sort(cliques.begin(), cliques.end());
  return make_cover(g.node_count(), std::move(cliques));
}

bool is_chordal(const Graph& g) {
  const int n = g.node_count();
  std::vector<int> weight(n, 0);
  std::vector<int> position(n, -1);
  std::vector<int> order;
  order.reserve(n);
  for (int step = 0; step < n; ++step) {
    int pick = -1;
    for (int v = 0; v < n; ++v) {
      if (position[v] >= 0) continue;
      if (pick < 0 || weight[v] > weight[pick]) pick = v;
    }
    position[pick] = step;
    order.push_back(pick);
    for (int u = 0; u < n; ++u)
      if (position[u] < 0 && g.has_edge(pick, u)) ++weight[u];
  }
  // The reverse of the visit order is a perfect elimination ordering iff the
  // graph is chordal: the earlier-visited neighbours of each vertex, minus the
  // latest of them, must all be adjacent to that latest one.
  for (int v : order) {
    std::vector<int> earlier;
    for (int u = 0; u < n; ++u)
      if (g.has_edge(v, u) && position[u] < position[v]) earlier.push_back(u);
    if (earlier.size() < 2) continue;
    const int parent = *std::max_element(
        earlier.begin(), earlier.end(),
        [&](int a, int b) { return position[a] < position[b]; });
    for (int u : earlier)
      if (u != parent && !g.has_edge(u, parent)) return false;
  }
  return true;
}

bool cliques_are_complete(const Graph& g, const CliqueCover& cover) {
  for (const auto& clique : cover.cliques)
    for (std::size_t a = 0; a < clique.size(); ++a)
      for (std::size_t b = a + 1; b < clique.size(); ++b)
        if (!g.has_edge(clique[a], clique[b])) return false;
  return true;
}

bool verify_assumption1(const Graph& g, const CliqueCover& cover) {
  const int n = g.node_count();
  if (static_cast<int>(cover.membership.size()) != n) return false;
  for (int i = 0; i < n; ++i)
    if (cover.membership[i].empty()) return false;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& qi = cover.membership[i];
      const auto& qj = cover.membership[j];
      bool share = false;
      for (int k : qi)
        if (std::find(qj.begin(), qj.end(), k) != qj.end()) share = true;
      if (share != g.has_edge(i, j)) return false;
    }
  }
  return true;
}

UncoveredNodesError::UncoveredNodesError(std::vector<int> nodes)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "nodes not covered by any clique:";
        for (int v : nodes) os << ' ' << v;
        return os.str();
      }()),
      nodes_(std::move(nodes)) {}

std::vector<int> membership_counts(const CliqueCover& cover, int node_count) {
  std::vector<int> counts(node_count, 0);
  for (const auto& clique : cover.cliques) {
    for (int v : clique) {
      if (v < 0 || v >= node_count) {
        throw std::out_of_range("membership_counts: node index out of range");
      }
      ++counts[v];
    }
  }
  std::vector<int> uncovered;
  for (int i = 0; i < node_count; ++i)
    if (counts[i] == 0) uncovered.push_back(i);
  if (!uncovered.empty()) throw UncoveredNodesError(std::move(uncovered));
  return counts;
}

Graph graph_from_positions(const std::vector<Eigen::Vector2d>& positions,
                           double radius) {
  const int n = static_cast<int>(positions.size());
  Graph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((positions[i] - positions[j]).norm() <= radius) g.add_edge(i, j);
  return g;
}

DiskGraph disk_graph(int n, double radius, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("disk_graph: n must be positive");
  if (radius < 0) throw std::invalid_argument("disk_graph: negative radius");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector2d> positions(n);
  for (auto& p : positions) {
    p.x() = unit(rng);
    p.y() = unit(rng);
  }
  Graph g = graph_from_positions(positions, radius);
  return DiskGraph{std::move(g), std::move(positions)};
}

DiskGraph disk_graph(int n, double radius, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return disk_graph(n, radius, rng);
}

}  // namespace cliquesynth
