#ifndef SPPDM_GRAPH_HPP
#define SPPDM_GRAPH_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/rng.hpp"

namespace sppdm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Undirected connected simple graph.  Edges are kept canonical (i < j,
// lexicographically sorted) so that incidence-row ordering is a pure
// function of the edge set.
struct Graph {
  int nodes = 0;
  std::vector<std::pair<int, int>> edges;      // canonical order
  std::vector<int> degree;                     // d_i
  std::vector<std::vector<int>> neighbors;     // ascending per node

  int edge_count() const { return static_cast<int>(edges.size()); }
  int max_degree() const {
    return degree.empty() ? 0 : *std::max_element(degree.begin(), degree.end());
  }
};

namespace detail {

inline void check_connected(const Graph& g) {
  if (g.nodes <= 1) return;
  std::vector<char> seen(static_cast<std::size_t>(g.nodes), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : g.neighbors[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  if (reached != g.nodes)
    throw DisconnectedGraph("graph is not connected (BFS from node 0 reached " +
                            std::to_string(reached) + " of " +
                            std::to_string(g.nodes) + " nodes)");
}

}  // namespace detail

// Builds a graph from an explicit edge list.  Edges may be given in any
// order and orientation; they are canonicalized here.  N = 1 with an empty
// edge list is allowed as the degenerate single-agent network.
inline Graph make_graph(int nodes, std::vector<std::pair<int, int>> edge_list) {
  if (nodes < 1) throw BadParameters("graph needs at least one node");
  Graph g;
  g.nodes = nodes;
  for (auto& [a, b] : edge_list) {
    if (a == b) throw SelfLoop("self-loop at node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= nodes || b >= nodes)
      throw BadParameters("edge endpoint out of range");
    if (a > b) std::swap(a, b);
  }
  std::sort(edge_list.begin(), edge_list.end());
  for (std::size_t i = 1; i < edge_list.size(); ++i)
    if (edge_list[i] == edge_list[i - 1])
      throw DuplicateEdge("duplicate edge (" +
                          std::to_string(edge_list[i].first) + "," +
                          std::to_string(edge_list[i].second) + ")");
  g.edges = std::move(edge_list);
  g.degree.assign(static_cast<std::size_t>(nodes), 0);
  g.neighbors.assign(static_cast<std::size_t>(nodes), {});
  for (auto [i, j] : g.edges) {
    ++g.degree[static_cast<std::size_t>(i)];
    ++g.degree[static_cast<std::size_t>(j)];
    g.neighbors[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  detail::check_connected(g);
  return g;
}

// Named topology families.  All require N >= 2; single-agent setups go
// through make_graph(1, {}).
inline Graph circle_graph(int n) {
  if (n < 2) throw BadParameters("circle graph needs N >= 2");
  if (n == 2) return make_graph(2, {{0, 1}});  // two nodes: single edge
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return make_graph(n, std::move(edges));
}

inline Graph path_graph(int n) {
  if (n < 2) throw BadParameters("path graph needs N >= 2");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_graph(n, std::move(edges));
}

inline Graph complete_graph(int n) {
  if (n < 2) throw BadParameters("complete graph needs N >= 2");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return make_graph(n, std::move(edges));
}

// Topology descriptor as it appears in config files.
struct TopologySpec {
  std::string family = "circle";  // circle | path | complete | edges
  int nodes = 0;
  std::vector<std::pair<int, int>> edges;  // used when family == "edges"
};

inline Graph build_graph(const TopologySpec& spec) {
  if (spec.family == "circle") return circle_graph(spec.nodes);
  if (spec.family == "path") return path_graph(spec.nodes);
  if (spec.family == "complete") return complete_graph(spec.nodes);
  if (spec.family == "edges") return make_graph(spec.nodes, spec.edges);
  throw BadParameters("unknown topology family '" + spec.family + "'");
}

// Edge-by-node incidence matrices.  Row l of the signed matrix has +1 at
// the smaller endpoint and -1 at the larger one; the signless matrix is its
// elementwise absolute value.  The block (Kronecker) extension to
// n-dimensional per-agent vectors is never materialized: applying these
// N-column matrices to an agents-by-coordinates matrix is equivalent.
struct IncidencePair {
  Mat signed_incidence;    // |E| x N
  Mat signless_incidence;  // |E| x N

  Mat laplacian() const {
    return signed_incidence.transpose() * signed_incidence;
  }
  Mat signless_laplacian() const {
    return signless_incidence.transpose() * signless_incidence;
  }
};

inline IncidencePair incidence_matrices(const Graph& g) {
  IncidencePair inc;
  inc.signed_incidence = Mat::Zero(g.edge_count(), g.nodes);
  inc.signless_incidence = Mat::Zero(g.edge_count(), g.nodes);
  for (int l = 0; l < g.edge_count(); ++l) {
    auto [i, j] = g.edges[static_cast<std::size_t>(l)];
    inc.signed_incidence(l, i) = 1.0;
    inc.signed_incidence(l, j) = -1.0;
    inc.signless_incidence(l, i) = 1.0;
    inc.signless_incidence(l, j) = 1.0;
  }
  return inc;
}

// Metropolis mixing weights: W_ij = 1 / (max(d_i, d_j) + 1) on edges, zero
// elsewhere off the diagonal, and the diagonal absorbs the remainder so
// rows sum to one.
inline Mat metropolis_weights(const Graph& g) {
  Mat w = Mat::Zero(g.nodes, g.nodes);
  for (auto [i, j] : g.edges) {
    double v = 1.0 / (std::max(g.degree[static_cast<std::size_t>(i)],
                               g.degree[static_cast<std::size_t>(j)]) +
                      1.0);
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < g.nodes; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

// Largest singular value by power iteration on m^T m.  The all-ones start
// vector can be orthogonal to the dominant eigenspace (it is in the kernel
// of every graph Laplacian), so a second deterministic pseudorandom start
// runs as well and the larger limit wins.
inline double spectral_norm(const Mat& m) {
  if (!m.allFinite()) throw NonFinite("spectral_norm: matrix has NaN/Inf");
  if (m.rows() == 0 || m.cols() == 0) return 0.0;

  const Mat gram = m.transpose() * m;
  const double scale = gram.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;

  constexpr int kMaxIters = 10000;
  constexpr double kTol = 1e-10;

  const auto iterate_from = [&](Vec v) {
    double lambda = 0.0;
    for (int it = 0; it < kMaxIters; ++it) {
      Vec w = gram * v;
      const double norm = w.norm();
      if (norm <= 1e-14 * scale * v.norm()) return 0.0;  // start in the kernel
      w /= norm;
      const double next = w.dot(gram * w);
      const bool settled =
          std::abs(next - lambda) <= kTol * std::max(1.0, std::abs(next));
      lambda = next;
      if (settled) break;
      v = std::move(w);
    }
    return lambda;
  };

  Vec seeded(gram.rows());
  {
    std::uint64_t h = 0x5eedULL;
    for (Eigen::Index i = 0; i < seeded.size(); ++i) {
      h = detail::splitmix64(h);
      seeded[i] =
          static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;  // [-1, 1)
    }
  }
  const double lambda = std::max(iterate_from(Vec::Ones(gram.rows())),
                                 iterate_from(std::move(seeded)));
  return std::sqrt(std::max(0.0, lambda));
}

}  // namespace sppdm

#endif  // SPPDM_GRAPH_HPP
