#ifndef SPPDM_TESTS_SUPPORT_HPP
#define SPPDM_TESTS_SUPPORT_HPP

// Test-only oracles.  These deliberately re-derive quantities through
// independent routes (finite differences, brute-force grids, dense
// eigensolves) and must not call the code paths they are checking.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "sppdm/graph.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/rng.hpp"

namespace testsupport {

using sppdm::Mat;
using sppdm::Vec;

// Central finite-difference gradient of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f,
                       const Vec& x, double step_scale = 1e-6) {
  const double h = step_scale * (1.0 + x.norm());
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Brute-force scalar minimizer of (w/2)(v-u)^2 + l1|u| + box over a grid.
inline double grid_prox_scalar(double v, double weight, double l1, double lo,
                               double hi, double resolution = 1e-6) {
  const double a = std::max(lo, v - 3.0);
  const double b = std::min(hi, v + 3.0);
  double best_u = a, best_val = std::numeric_limits<double>::infinity();
  for (double u = a; u <= b + resolution / 2; u += resolution) {
    const double uu = std::min(u, b);
    const double val = 0.5 * weight * (v - uu) * (v - uu) + l1 * std::abs(uu);
    if (val < best_val) {
      best_val = val;
      best_u = uu;
    }
  }
  return best_u;
}

// Largest singular value through a dense symmetric eigensolve.
inline double dense_spectral_norm(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Random connected simple graph: spanning tree plus extra edges.
inline sppdm::Graph random_connected_graph(int nodes, sppdm::Prng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < nodes; ++v) {
    const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    edges.emplace_back(u, v);
  }
  const int extra = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes + 1)));
  for (int e = 0; e < extra; ++e) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(nodes)));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (auto [i, j] : edges)
      if ((i == a && j == b) || (i == b && j == a)) dup = true;
    if (!dup) edges.emplace_back(a, b);
  }
  return sppdm::make_graph(nodes, std::move(edges));
}

// Small deterministic problem with quadratic agents (convex, closed forms).
inline sppdm::ProblemInstance quadratic_problem(int agents, int dim,
                                                double curvature = 1.0,
                                                double l1 = 0.0) {
  sppdm::ProblemInstance p;
  p.dim = dim;
  p.lipschitz = curvature;
  p.weak_convexity = 0.0;
  for (int i = 0; i < agents; ++i) {
    Vec b = Vec::Zero(dim);
    b[i % dim] = 0.5 * (i + 1);
    p.smooth.push_back(std::make_shared<sppdm::QuadraticTerm>(
        curvature * Mat::Identity(dim, dim), b));
    if (l1 > 0.0)
      p.regularizer.push_back(
          std::make_shared<sppdm::L1BoxRegularizer>(l1, -1.0, 1.0));
    else
      p.regularizer.push_back(std::make_shared<sppdm::ZeroRegularizer>());
  }
  p.objective_floor = -10.0 * agents;  // loose but valid for these terms
  return p;
}

// Desk-size nonconvex regression instance.
inline sppdm::GeneratedProblem desk_problem(std::uint64_t seed, int agents = 5,
                                            int samples = 20, int dim = 32,
                                            int sparsity = 4) {
  sppdm::RegressionSpec spec;
  spec.agents = agents;
  spec.samples_per_agent = samples;
  spec.dim = dim;
  spec.sparsity = sparsity;
  return sppdm::generate_regression(seed, spec);
}

}  // namespace testsupport

#endif  // SPPDM_TESTS_SUPPORT_HPP
