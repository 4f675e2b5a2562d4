#ifndef SPPDM_SOLVER_HPP
#define SPPDM_SOLVER_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/rng.hpp"

namespace sppdm {

enum class MomentumKind { zero, constant, nesterov };

// Extrapolation coefficient of the accelerated schedule:
//   theta_{-1} = theta_0 = 1,
//   eta_k = (theta_{k-1} - 1) / theta_k,
//   theta_{k+1} = (1 + sqrt(1 + 4 theta_k^2)) / 2.
inline double nesterov_schedule(int k) {
  if (k < 0) throw BadParameters("schedule index must be >= 0");
  double theta_prev = 1.0;  // theta_{-1}
  double theta = 1.0;       // theta_0
  for (int t = 0; t < k; ++t) {
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    theta_prev = theta;
    theta = next;
  }
  return (theta_prev - 1.0) / theta;
}

struct SolverConfig {
  double alpha = 2.0;  // dual step
  double beta = 0.9;   // proximal-variable step, in (0, 1]
  double gamma = 3.0;  // surrogate curvature
  double c = 2.0;      // consensus penalty
  double kappa = 1.0;  // proximal coupling weight
  MomentumKind momentum = MomentumKind::nesterov;
  double eta = 0.0;          // used by the constant schedule
  int batch = kFullBatch;    // kFullBatch => exact gradients (PPDM)
  int iterations = 2000;
  std::uint64_t seed = 1;

  double eta_at(int k) const {
    switch (momentum) {
      case MomentumKind::zero: return 0.0;
      case MomentumKind::constant: return eta;
      case MomentumKind::nesterov: return nesterov_schedule(k);
    }
    return 0.0;
  }

  bool full_batch() const { return batch == kFullBatch; }

  void validate() const {
    if (alpha <= 0.0) throw BadParameters("alpha must be positive");
    if (beta <= 0.0 || beta > 1.0) throw BadParameters("beta must be in (0,1]");
    if (gamma <= 0.0) throw BadParameters("gamma must be positive");
    if (c <= 0.0) throw BadParameters("c must be positive");
    if (kappa <= 0.0) throw BadParameters("kappa must be positive");
    if (eta < 0.0) throw BadParameters("eta must be >= 0");
    if (batch < 0) throw BadParameters("batch must be >= 0");
    if (iterations < 1) throw BadParameters("iterations must be >= 1");
  }
};

inline double psi_weight(const SolverConfig& cfg, int degree) {
  return cfg.gamma + 2.0 * cfg.c * degree + cfg.kappa;
}

// The pair of mixing operators of the stacked half-step recursion
//   x(half,k) = x(half,k-1) + U x^k - Utilde x^{k-1} + ...
// kept sparse over the edge structure.  Diagonal scaling is Psi.
struct UpdateMatrices {
  Vec psi;  // Psi diagonal
  Eigen::SparseMatrix<double> u;
  Eigen::SparseMatrix<double> u_tilde;
};

inline UpdateMatrices build_update_matrices(const Graph& g,
                                            const SolverConfig& cfg) {
  UpdateMatrices m;
  m.psi.resize(g.nodes);
  for (int i = 0; i < g.nodes; ++i)
    m.psi[i] = psi_weight(cfg, g.degree[static_cast<std::size_t>(i)]);

  std::vector<Eigen::Triplet<double>> u_entries, ut_entries;
  for (int i = 0; i < g.nodes; ++i) {
    const double d = g.degree[static_cast<std::size_t>(i)];
    u_entries.emplace_back(i, i, d * (cfg.c - cfg.alpha) / m.psi[i]);
    ut_entries.emplace_back(i, i, d * cfg.c / m.psi[i]);
    for (int j : g.neighbors[static_cast<std::size_t>(i)]) {
      u_entries.emplace_back(i, j, (cfg.c + cfg.alpha) / m.psi[i]);
      ut_entries.emplace_back(i, j, cfg.c / m.psi[i]);
    }
  }
  m.u.resize(g.nodes, g.nodes);
  m.u_tilde.resize(g.nodes, g.nodes);
  m.u.setFromTriplets(u_entries.begin(), u_entries.end());
  m.u_tilde.setFromTriplets(ut_entries.begin(), ut_entries.end());
  return m;
}

// --------------------------------------------------------------------------
// Per-agent update kernels.
//
// Both the matrix-form solver and the message-passing simulator funnel
// through these functions, with neighbor values in ascending-id order, so
// the two execution styles produce bit-identical trajectories.

namespace agent_kernel {

inline Vec momentum_point(const Vec& x, const Vec& x_prev, double eta) {
  if (eta == 0.0) return x;
  return x + eta * (x - x_prev);
}

// alpha * (A'A x)_i = alpha * (d_i x_i - sum_j x_j): the agent's share of
// the dual ascent.
inline Vec dual_ascent_increment(double alpha, int degree, const Vec& x_self,
                                 const std::vector<const Vec*>& neighbor_x) {
  Vec acc = static_cast<double>(degree) * x_self;
  for (const Vec* xj : neighbor_x) acc -= *xj;
  return alpha * acc;
}

// First half-step (bootstrap round):
//   psi * xh = (gamma + kappa + c d) x0 + c sum_j x0_j - grad0 - p1.
inline Vec bootstrap_half_point(const SolverConfig& cfg, double psi,
                                int degree, const Vec& x0,
                                const std::vector<const Vec*>& neighbor_x0,
                                const Vec& grad0, const Vec& dual1) {
  Vec acc = ((cfg.gamma + cfg.kappa + cfg.c * degree) / psi) * x0;
  for (const Vec* xj : neighbor_x0) acc += (cfg.c / psi) * (*xj);
  acc -= (1.0 / psi) * grad0;
  acc -= (1.0 / psi) * dual1;
  return acc;
}

// Main-loop half-step in difference form:
//   xh += (d (c-alpha)/psi) x - (d c/psi) x_prev
//       + sum_j [((c+alpha)/psi) x_j - (c/psi) x_j_prev]
//       + (gamma/psi)(s - s_prev) + (kappa/psi)(z - z_prev)
//       - (1/psi)(grad - grad_prev).
inline Vec half_point_update(const SolverConfig& cfg, double psi, int degree,
                             const Vec& x_half_prev, const Vec& x_self,
                             const Vec& x_self_prev,
                             const std::vector<const Vec*>& neighbor_x,
                             const std::vector<const Vec*>& neighbor_x_prev,
                             const Vec& s, const Vec& s_prev, const Vec& z,
                             const Vec& z_prev, const Vec& grad,
                             const Vec& grad_prev) {
  const double d = static_cast<double>(degree);
  Vec acc = x_half_prev + (d * (cfg.c - cfg.alpha) / psi) * x_self -
            (d * cfg.c / psi) * x_self_prev;
  for (std::size_t j = 0; j < neighbor_x.size(); ++j)
    acc += ((cfg.c + cfg.alpha) / psi) * (*neighbor_x[j]) -
           (cfg.c / psi) * (*neighbor_x_prev[j]);
  acc += (cfg.gamma / psi) * (s - s_prev);
  acc += (cfg.kappa / psi) * (z - z_prev);
  acc -= (1.0 / psi) * (grad - grad_prev);
  return acc;
}

}  // namespace agent_kernel

// --------------------------------------------------------------------------
// Matrix-form solver state.  Rows index agents, columns coordinates.

struct SolverState {
  Mat x;           // x^k
  Mat x_prev;      // x^{k-1}
  Mat x_half;      // carried half iterate x^{k-1+1/2}
  Mat s_prev;      // s^{k-1}
  Mat z;           // z^k
  Mat z_prev;      // z^{k-1}
  Mat grad_prev;   // gradient estimate consumed at s^{k-1}
  Mat dual_image;  // p^k = A' lambda^k
  int round = 0;   // index k of the next update round

  int agents() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

namespace detail {

inline std::vector<Vec> rows_of(const Mat& m) {
  std::vector<Vec> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

inline std::vector<const Vec*> neighbor_views(const std::vector<Vec>& rows,
                                              const std::vector<int>& ids) {
  std::vector<const Vec*> out;
  out.reserve(ids.size());
  for (int j : ids) out.push_back(&rows[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace detail

// Bootstrap: from x^0 build x^1 together with the carried half iterate, the
// proximal variable and the dual image.  The round-0 gradient is exact
// (mini batches start at round 1), and the round-0 dual ascent is included,
// so the state entering round 1 carries p^1 = alpha A'A x^0.
inline SolverState sppdm_init(const ProblemInstance& problem, const Graph& g,
                              const SolverConfig& cfg, const Mat& x0) {
  cfg.validate();
  if (x0.rows() != problem.agents() || x0.cols() != problem.dim)
    throw DimensionMismatch("x0 must be agents x dim");
  if (g.nodes != problem.agents())
    throw DimensionMismatch("graph size != agent count");

  const auto x0_rows = detail::rows_of(x0);
  SolverState st;
  st.x.resizeLike(x0);
  st.x_half.resizeLike(x0);
  st.dual_image.resizeLike(x0);

  for (int i = 0; i < g.nodes; ++i) {
    const auto& nbrs = g.neighbors[static_cast<std::size_t>(i)];
    const int deg = g.degree[static_cast<std::size_t>(i)];
    const double psi = psi_weight(cfg, deg);
    const auto views = detail::neighbor_views(x0_rows, nbrs);
    const Vec grad0 =
        problem.smooth_term(i).gradient(x0_rows[static_cast<std::size_t>(i)]);
    const Vec dual1 = agent_kernel::dual_ascent_increment(
        cfg.alpha, deg, x0_rows[static_cast<std::size_t>(i)], views);
    const Vec half = agent_kernel::bootstrap_half_point(
        cfg, psi, deg, x0_rows[static_cast<std::size_t>(i)], views, grad0,
        dual1);
    st.dual_image.row(i) = dual1.transpose();
    st.x_half.row(i) = half.transpose();
    st.x.row(i) = problem.regularizer_term(i).prox(half, psi).transpose();
  }
  if (!st.x.allFinite())
    throw NonFiniteIterate("non-finite iterate at bootstrap");

  st.x_prev = x0;
  st.s_prev = x0;
  st.z_prev = x0;
  st.z = x0 + cfg.beta * (st.x - x0);
  st.grad_prev = problem.smooth_gradient(x0);
  st.round = 1;
  return st;
}

// One synchronous round k >= 1: momentum point, gradient estimate at s^k,
// half-step in difference form, prox, proximal-variable update, and the
// dual-image recursion p^{k+1} = p^k + alpha A'A x^k.
inline void sppdm_step(SolverState& st, const ProblemInstance& problem,
                       const Graph& g, const SolverConfig& cfg) {
  if (st.round < 1) throw PreconditionViolated("state not initialized");
  const int k = st.round;
  const double eta = cfg.eta_at(k);

  const auto x_rows = detail::rows_of(st.x);
  const auto x_prev_rows = detail::rows_of(st.x_prev);

  Mat x_next(st.x.rows(), st.x.cols());
  Mat s_now(st.x.rows(), st.x.cols());
  Mat grad_now(st.x.rows(), st.x.cols());
  Mat half_now(st.x.rows(), st.x.cols());
  Mat dual_next = st.dual_image;

  for (int i = 0; i < g.nodes; ++i) {
    const auto& nbrs = g.neighbors[static_cast<std::size_t>(i)];
    const int deg = g.degree[static_cast<std::size_t>(i)];
    const double psi = psi_weight(cfg, deg);
    const auto views_x = detail::neighbor_views(x_rows, nbrs);
    const auto views_x_prev = detail::neighbor_views(x_prev_rows, nbrs);

    const Vec s = agent_kernel::momentum_point(
        x_rows[static_cast<std::size_t>(i)],
        x_prev_rows[static_cast<std::size_t>(i)], eta);
    const Vec grad = stochastic_gradient(
        problem.smooth_term(i), s,
        StreamKey{cfg.seed, static_cast<std::uint64_t>(i),
                  static_cast<std::uint64_t>(k)},
        cfg.batch);
    const Vec half = agent_kernel::half_point_update(
        cfg, psi, deg, st.x_half.row(i).transpose(),
        x_rows[static_cast<std::size_t>(i)],
        x_prev_rows[static_cast<std::size_t>(i)], views_x, views_x_prev, s,
        st.s_prev.row(i).transpose(), st.z.row(i).transpose(),
        st.z_prev.row(i).transpose(), grad, st.grad_prev.row(i).transpose());

    s_now.row(i) = s.transpose();
    grad_now.row(i) = grad.transpose();
    half_now.row(i) = half.transpose();
    x_next.row(i) = problem.regularizer_term(i).prox(half, psi).transpose();
    dual_next.row(i) +=
        agent_kernel::dual_ascent_increment(
            cfg.alpha, deg, x_rows[static_cast<std::size_t>(i)], views_x)
            .transpose();
  }
  if (!x_next.allFinite())
    throw NonFiniteIterate("non-finite iterate at round " + std::to_string(k));

  st.x_prev = st.x;
  st.x = x_next;
  st.x_half = half_now;
  st.s_prev = s_now;
  st.z_prev = st.z;
  st.z += cfg.beta * (x_next - st.z);
  st.grad_prev = grad_now;
  st.dual_image = dual_next;
  st.round = k + 1;
}

// Runs bootstrap + rounds 1..K-1.  The visitor fires once per iteration
// index 0..K-1; at that moment st.x_prev is x^k and st.dual_image is
// p^{k+1}, the pairing the optimality gap is defined on.
using StepVisitor = std::function<void(int, const SolverState&)>;

inline SolverState run_solver(const ProblemInstance& problem, const Graph& g,
                              const SolverConfig& cfg, const Mat& x0,
                              const StepVisitor& visit = {}) {
  SolverState st = sppdm_init(problem, g, cfg, x0);
  if (visit) visit(0, st);
  for (int k = 1; k < cfg.iterations; ++k) {
    sppdm_step(st, problem, g, cfg);
    if (visit) visit(k, st);
  }
  return st;
}

// --------------------------------------------------------------------------
// Primal-dual reference iteration.
//
// The same updates without the difference-form rewrite: the dual variable
// lives explicitly on edges and every x^{k+1} is recomputed from the full
// proximal expression.  Serves as the algebraic oracle for the solver above
// (shared gradient streams, independent arithmetic path).

struct ReferenceState {
  Mat x;       // x^k
  Mat x_prev;  // x^{k-1}
  Mat z;       // z^k
  Mat lambda;  // |E| x dim, lambda^k
  int round = 0;
};

inline ReferenceState reference_init(const ProblemInstance& problem,
                                     const Graph& g, const IncidencePair& inc,
                                     const SolverConfig& cfg, const Mat& x0) {
  cfg.validate();
  ReferenceState st;
  st.x_prev = x0;
  st.z = x0;
  st.lambda = cfg.alpha * (inc.signed_incidence * x0);

  const Mat grad0 = problem.smooth_gradient(x0);
  const Mat signless = inc.signless_laplacian();
  Mat target = cfg.gamma * x0 + cfg.c * (signless * x0) + cfg.kappa * x0 -
               grad0 - inc.signed_incidence.transpose() * st.lambda;
  st.x.resizeLike(x0);
  for (int i = 0; i < g.nodes; ++i) {
    const double psi =
        psi_weight(cfg, g.degree[static_cast<std::size_t>(i)]);
    st.x.row(i) = problem.regularizer_term(i)
                      .prox(target.row(i).transpose() / psi, psi)
                      .transpose();
  }
  st.z = x0 + cfg.beta * (st.x - x0);
  st.round = 1;
  return st;
}

inline void reference_step(ReferenceState& st, const ProblemInstance& problem,
                           const Graph& g, const IncidencePair& inc,
                           const SolverConfig& cfg) {
  const int k = st.round;
  const double eta = cfg.eta_at(k);

  st.lambda += cfg.alpha * (inc.signed_incidence * st.x);
  const Mat s = st.x + eta * (st.x - st.x_prev);

  Mat grad(st.x.rows(), st.x.cols());
  for (int i = 0; i < g.nodes; ++i)
    grad.row(i) = stochastic_gradient(
                      problem.smooth_term(i), s.row(i).transpose(),
                      StreamKey{cfg.seed, static_cast<std::uint64_t>(i),
                                static_cast<std::uint64_t>(k)},
                      cfg.batch)
                      .transpose();

  const Mat signless = inc.signless_laplacian();
  Mat target = cfg.gamma * s + cfg.c * (signless * st.x) + cfg.kappa * st.z -
               grad - inc.signed_incidence.transpose() * st.lambda;
  Mat x_next(st.x.rows(), st.x.cols());
  for (int i = 0; i < g.nodes; ++i) {
    const double psi =
        psi_weight(cfg, g.degree[static_cast<std::size_t>(i)]);
    x_next.row(i) = problem.regularizer_term(i)
                        .prox(target.row(i).transpose() / psi, psi)
                        .transpose();
  }
  if (!x_next.allFinite())
    throw NonFiniteIterate("non-finite reference iterate at round " +
                           std::to_string(k));

  st.x_prev = st.x;
  st.x = x_next;
  st.z += cfg.beta * (x_next - st.z);
  st.round = k + 1;
}

}  // namespace sppdm

#endif  // SPPDM_SOLVER_HPP
