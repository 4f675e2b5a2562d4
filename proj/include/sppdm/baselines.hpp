#ifndef SPPDM_BASELINES_HPP
#define SPPDM_BASELINES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/solver.hpp"

namespace sppdm {

// --------------------------------------------------------------------------
// PG-EXTRA written directly in its two-matrix recursion
//   xh^k = xh^{k-1} + W x^k - Wt x^{k-1} - Psi^{-1}(grad f(x^k) - grad f(x^{k-1})),
//   x^{k+1} = prox_r^Psi(xh^k),
// with W = U + (gamma+kappa) Psi^{-1} and Wt = Utilde + (gamma+kappa) Psi^{-1}.
// The solver with eta = 0, beta = 1 reduces to exactly this, which makes the
// direct implementation a cross-check oracle.

struct PgExtraMatrices {
  Mat w;
  Mat w_tilde;
  Vec psi;
};

inline PgExtraMatrices pg_extra_matrices(const Graph& g,
                                         const SolverConfig& cfg) {
  const IncidencePair inc = incidence_matrices(g);
  PgExtraMatrices m;
  m.psi.resize(g.nodes);
  for (int i = 0; i < g.nodes; ++i)
    m.psi[i] = psi_weight(cfg, g.degree[static_cast<std::size_t>(i)]);
  const Mat psi_inv = m.psi.cwiseInverse().asDiagonal();
  m.w_tilde = psi_inv * ((cfg.gamma + cfg.kappa) * Mat::Identity(g.nodes, g.nodes) +
                         cfg.c * inc.signless_laplacian());
  m.w = m.w_tilde - cfg.alpha * (psi_inv * inc.laplacian());
  return m;
}

struct PgExtraState {
  Mat x;
  Mat x_prev;
  Mat x_half;
  int round = 0;
};

inline PgExtraState pg_extra_init(const ProblemInstance& problem,
                                  const PgExtraMatrices& m, const Mat& x0) {
  PgExtraState st;
  st.x_prev = x0;
  st.x_half = m.w * x0 - m.psi.cwiseInverse().asDiagonal() *
                             problem.smooth_gradient(x0);
  st.x.resizeLike(x0);
  for (int i = 0; i < problem.agents(); ++i)
    st.x.row(i) = problem.regularizer_term(i)
                      .prox(st.x_half.row(i).transpose(), m.psi[i])
                      .transpose();
  st.round = 1;
  return st;
}

inline void pg_extra_step(PgExtraState& st, const ProblemInstance& problem,
                          const PgExtraMatrices& m) {
  const Mat grad_diff =
      problem.smooth_gradient(st.x) - problem.smooth_gradient(st.x_prev);
  st.x_half += m.w * st.x - m.w_tilde * st.x_prev -
               m.psi.cwiseInverse().asDiagonal() * grad_diff;
  Mat x_next(st.x.rows(), st.x.cols());
  for (int i = 0; i < problem.agents(); ++i)
    x_next.row(i) = problem.regularizer_term(i)
                        .prox(st.x_half.row(i).transpose(), m.psi[i])
                        .transpose();
  if (!x_next.allFinite())
    throw NonFiniteIterate("non-finite PG-EXTRA iterate at round " +
                           std::to_string(st.round));
  st.x_prev = st.x;
  st.x = x_next;
  ++st.round;
}

// --------------------------------------------------------------------------
// Proximal decentralized gradient descent with a diminishing step size.

inline double diminishing_step(int k) { return 1.0 / (3.0 * std::sqrt(k + 100.0)); }

// x^{k+1} = prox_r^{1/l}( W x^k - l grad f(x^k) )
inline Mat prox_dgd_step(const Mat& x, const ProblemInstance& problem,
                         const Mat& mixing, double step) {
  if (step <= 0.0) throw BadParameters("step size must be positive");
  const Mat proposal = mixing * x - step * problem.smooth_gradient(x);
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < problem.agents(); ++i)
    out.row(i) = problem.regularizer_term(i)
                     .prox(proposal.row(i).transpose(), 1.0 / step)
                     .transpose();
  if (!out.allFinite()) throw NonFiniteIterate("non-finite Prox-DGD iterate");
  return out;
}

// --------------------------------------------------------------------------
// Projected stochastic gradient descent.  Handles the box constraint only;
// an l1 component of the regularizer is not part of this baseline's model.

inline Mat psgd_step(const Mat& x, const ProblemInstance& problem,
                     const Mat& mixing, double step, std::uint64_t seed,
                     int iteration, int batch) {
  if (step <= 0.0) throw BadParameters("step size must be positive");
  Mat proposal = mixing * x;
  for (int i = 0; i < problem.agents(); ++i) {
    const Vec g = stochastic_gradient(
        problem.smooth_term(i), x.row(i).transpose(),
        StreamKey{seed, static_cast<std::uint64_t>(i),
                  static_cast<std::uint64_t>(iteration)},
        batch);
    proposal.row(i) -= step * g.transpose();
  }
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < problem.agents(); ++i) {
    const auto* box = dynamic_cast<const L1BoxRegularizer*>(
        &problem.regularizer_term(i));
    if (box != nullptr) {
      out.row(i) = proposal.row(i)
                       .cwiseMax(box->lower())
                       .cwiseMin(box->upper());
    } else {
      out.row(i) = proposal.row(i);  // unconstrained
    }
  }
  if (!out.allFinite()) throw NonFiniteIterate("non-finite PSGD iterate");
  return out;
}

// --------------------------------------------------------------------------
// Accelerated-gradient form with cumulative correction.
//
// With alpha = c, beta = 1 and no regularizer, the solver's iterates obey
//   x^{k+1} = Wt s^k - Psi^{-1} grad f(s^k) + C^k,
//   C^k = Psi^{-1}((c B'B + kappa I)(x^k - s^k)) - sum_{t<=k} (I - Wt) x^t,
// i.e. the accelerated distributed-gradient recursion plus a correction that
// accumulates the consensus history.  This check replays a solver run
// through that closed form and reports the worst deviation, plus the
// operator identity I - Wt = alpha Psi^{-1} A'A.

struct DngReport {
  double max_deviation = 0.0;    // sup-norm gap between solver and closed form
  double identity_error = 0.0;   // || (I - Wt) - alpha Psi^{-1} A'A ||_max
  double bootstrap_correction_error = 0.0;  // C^0 vs -(I - Wt) x^0
};

inline DngReport dng_equivalence_check(const ProblemInstance& problem,
                                       const Graph& g, const SolverConfig& cfg,
                                       const Mat& x0, int iterations) {
  if (cfg.alpha != cfg.c)
    throw PreconditionViolated("correction form needs alpha == c");
  if (cfg.beta != 1.0)
    throw PreconditionViolated("correction form needs beta == 1");
  if (!cfg.full_batch())
    throw PreconditionViolated("correction form needs full gradients");
  for (int i = 0; i < problem.agents(); ++i)
    if (dynamic_cast<const ZeroRegularizer*>(&problem.regularizer_term(i)) ==
        nullptr)
      throw PreconditionViolated("correction form needs r == 0");

  const IncidencePair inc = incidence_matrices(g);
  Vec psi(g.nodes);
  for (int i = 0; i < g.nodes; ++i)
    psi[i] = psi_weight(cfg, g.degree[static_cast<std::size_t>(i)]);
  const Mat psi_inv = psi.cwiseInverse().asDiagonal();
  const Mat identity = Mat::Identity(g.nodes, g.nodes);
  const Mat w_tilde = psi_inv * ((cfg.gamma + cfg.kappa) * identity +
                                 cfg.c * inc.signless_laplacian());
  const Mat one_minus_wt = identity - w_tilde;

  DngReport report;
  report.identity_error =
      (one_minus_wt - cfg.alpha * (psi_inv * inc.laplacian()))
          .cwiseAbs()
          .maxCoeff();

  SolverConfig run_cfg = cfg;
  run_cfg.iterations = iterations;

  Mat correction_sum = one_minus_wt * x0;  // sum_{t<=k} (I - Wt) x^t at k=0
  Mat x_k = x0;                            // x^k as seen by the closed form
  auto visitor = [&](int k, const SolverState& st) {
    const Mat& s_k = st.s_prev;  // s^k of the round that just completed
    const Mat correction =
        psi_inv * (cfg.c * (inc.signless_laplacian() * (x_k - s_k)) +
                   cfg.kappa * (x_k - s_k)) -
        correction_sum;
    if (k == 0) {
      // s^0 = x^0, so the general formula must collapse to -(I - Wt) x^0
      report.bootstrap_correction_error =
          (correction + one_minus_wt * x0).cwiseAbs().maxCoeff();
    }
    const Mat predicted =
        w_tilde * s_k - psi_inv * problem.smooth_gradient(s_k) + correction;
    report.max_deviation = std::max(
        report.max_deviation, (predicted - st.x).cwiseAbs().maxCoeff());
    x_k = st.x;
    correction_sum += one_minus_wt * x_k;
  };
  run_solver(problem, g, run_cfg, x0, visitor);
  return report;
}

}  // namespace sppdm

#endif  // SPPDM_BASELINES_HPP
