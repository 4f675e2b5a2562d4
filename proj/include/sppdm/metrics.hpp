#ifndef SPPDM_METRICS_HPP
#define SPPDM_METRICS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/oracles.hpp"
#include "sppdm/solver.hpp"

namespace sppdm {

// --------------------------------------------------------------------------
// Per-iteration trace

struct TraceRecord {
  int iteration = 0;
  double stationarity = 0.0;
  double consensus = 0.0;
  double q_gap = 0.0;
  double potential = std::numeric_limits<double>::quiet_NaN();  // optional
  double constraint_sq = 0.0;  // ||A x||^2
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::vector<double> column_q() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.q_gap);
    return v;
  }
  std::vector<double> column_stationarity() const {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.stationarity);
    return v;
  }
};

// --------------------------------------------------------------------------
// Pointwise measures

inline double consensus_violation_sq(const IncidencePair& inc, const Mat& x) {
  if (inc.signed_incidence.rows() == 0) return 0.0;
  return (inc.signed_incidence * x).squaredNorm();
}

// Squared proximal-gradient residual plus squared constraint violation,
//   || x - prox_r^1( x - grad f(x) - A'lambda ) ||^2 + || A x ||^2,
// evaluated with the dual image p = A'lambda.  Zero exactly at KKT points.
inline double optimality_gap(const Mat& x, const Mat& dual_image,
                             const ProblemInstance& problem,
                             const IncidencePair& inc) {
  const Mat target = x - problem.smooth_gradient(x) - dual_image;
  double residual = 0.0;
  for (int i = 0; i < problem.agents(); ++i) {
    const Vec proxed =
        problem.regularizer_term(i).prox(target.row(i).transpose(), 1.0);
    residual += (x.row(i).transpose() - proxed).squaredNorm();
  }
  return residual + consensus_violation_sq(inc, x);
}

// Single-copy regularizer: the sum of the per-agent terms evaluated at one
// shared point.  Supported for the zero / l1+box family, where the l1
// weights add and the boxes intersect.
inline std::shared_ptr<const NonsmoothTerm> aggregate_regularizer(
    const ProblemInstance& problem) {
  double weight = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < problem.agents(); ++i) {
    const auto& r = problem.regularizer_term(i);
    if (dynamic_cast<const ZeroRegularizer*>(&r) != nullptr) continue;
    const auto* l1box = dynamic_cast<const L1BoxRegularizer*>(&r);
    if (l1box == nullptr)
      throw BadParameters("aggregate regularizer needs zero or l1+box terms");
    weight += l1box->l1_weight();
    lo = std::max(lo, l1box->lower());
    hi = std::min(hi, l1box->upper());
  }
  if (weight == 0.0 && !std::isfinite(lo) && !std::isfinite(hi))
    return std::make_shared<ZeroRegularizer>();
  return std::make_shared<L1BoxRegularizer>(weight, lo, hi);
}

// The experiment-reported errors: both are evaluated at the agent average.
//   stationarity = || xbar - prox_rbar^1( xbar - sum_i grad f_i(xbar) ) ||^2
//   consensus    = (1/N) sum_i || x_i - xbar ||^2
inline std::pair<double, double> stationarity_and_consensus(
    const Mat& x, const ProblemInstance& problem) {
  const Vec mean = x.colwise().mean().transpose();
  Vec grad_sum = Vec::Zero(x.cols());
  for (int i = 0; i < problem.agents(); ++i)
    grad_sum += problem.smooth_term(i).gradient(mean);
  const auto rbar = aggregate_regularizer(problem);
  const double stationarity =
      (mean - rbar->prox(mean - grad_sum, 1.0)).squaredNorm();
  double consensus = 0.0;
  for (int i = 0; i < problem.agents(); ++i)
    consensus += (x.row(i).transpose() - mean).squaredNorm();
  consensus /= static_cast<double>(problem.agents());
  return {stationarity, consensus};
}

// --------------------------------------------------------------------------
// Convergence-theory constants

struct TheoryConstants {
  double rho_bound = 0.0;  // strong-convexity error-bound factor
  double sigma1 = 0.0, sigma2 = 0.0, sigma3 = 0.0, sigma4 = 0.0;
  double sigma5 = 1.0;  // supplied, not derivable here
  double eta_cap = 0.0;  // largest admissible constant extrapolation
  double tau = 0.0;
  double s_hat1 = 0.0, s_hat2 = 0.0;
  double alpha_cap = 0.0, beta_cap = 0.0;
  double big_k1 = 0.0, big_k2 = 0.0, big_k3 = 0.0, big_k4 = 0.0;
  double c0 = 0.0, c1 = 0.0;
  bool curvature_ok = false;  // kappa > -mu and gamma > 3L
  bool momentum_ok = false;   // run eta <= eta_cap
  bool alpha_ok = false;
  bool beta_ok = false;
  bool feasible = false;
  std::string violated;  // first violated condition, empty when feasible
};

// Computes every constant of the descent analysis for a given configuration.
// `eta_run` is the constant extrapolation coefficient the run actually uses
// (zero for no momentum; the accelerated schedule is not a constant and is
// reported as out of regime by the caller).
inline TheoryConstants theory_constants(const SolverConfig& cfg, double L,
                                        double mu, double sigma_a,
                                        int d_max, double sigma5,
                                        double eta_run) {
  TheoryConstants t;
  t.sigma5 = sigma5;
  const double inf = std::numeric_limits<double>::infinity();

  t.curvature_ok = (cfg.kappa > -mu) && (cfg.gamma > 3.0 * L);
  if (!t.curvature_ok) {
    t.violated = (cfg.kappa > -mu) ? "gamma > 3L" : "kappa > -mu";
    return t;
  }

  t.rho_bound = (cfg.kappa + L + cfg.c * sigma_a * sigma_a + 1.0) /
                (cfg.kappa + mu);
  t.sigma1 = t.rho_bound *
             (2.0 + 2.0 * cfg.c * d_max + cfg.gamma + cfg.kappa);
  t.sigma2 = cfg.gamma + L;
  t.sigma3 = sigma_a > 0.0 ? (cfg.kappa + mu) / sigma_a : inf;
  t.sigma4 = (cfg.kappa + mu) / cfg.kappa;

  const double margin = cfg.kappa + 2.0 * cfg.c + cfg.gamma - 3.0 * L;
  t.eta_cap = std::sqrt(margin / (2.0 * (cfg.gamma - mu + 3.0 * L)));
  t.momentum_ok = eta_run <= t.eta_cap;
  if (!t.momentum_ok) {
    t.violated = "eta <= eta_cap";
    return t;
  }

  // tau must keep both descent coefficients nonnegative:
  //   s1 = margin/2 - 2 tau >= 0   and   s2 = -((gamma+3L-mu)/2) eta^2 + tau >= 0;
  // the midpoint of the feasible interval keeps both strictly positive
  // whenever eta_run < eta_cap.
  const double tau_lo = std::max(
      0.0, 0.5 * (cfg.gamma + 3.0 * L - mu) * eta_run * eta_run);
  const double tau_hi = margin / 4.0;
  t.tau = 0.5 * (tau_lo + tau_hi);
  t.s_hat1 = 0.5 * margin - 2.0 * t.tau;
  t.s_hat2 = 0.5 * (mu - cfg.gamma - 3.0 * L) * eta_run * eta_run + t.tau;

  const double sa2 = sigma_a * sigma_a;
  const double cap1 =
      sigma_a > 0.0 ? t.s_hat1 / (4.0 * sigma_a * t.sigma1 * t.sigma1) : inf;
  const double cap2 =
      (sigma_a > 0.0 && eta_run > 0.0)
          ? t.s_hat2 / (4.0 * sa2 * t.sigma2 * t.sigma2 * eta_run * eta_run)
          : inf;
  t.alpha_cap = std::min({cap1, cap2, cfg.c});
  t.beta_cap = std::min(
      {cfg.alpha / (12.0 * cfg.kappa * sigma5 * sigma5), t.sigma4 / 36.0, 1.0});

  t.big_k1 = 6.0 + 40.0 * cfg.gamma + 20.0 * cfg.c * cfg.c * d_max * d_max +
             4.0 * (20.0 * cfg.c * cfg.c * sa2 + 1.0) * sa2 * t.sigma1 * t.sigma1;
  t.big_k2 = (20.0 * L * L + 20.0 * cfg.gamma * cfg.gamma) * t.eta_cap * t.eta_cap +
             4.0 * (20.0 * cfg.c * cfg.c * sa2 + 1.0) * sa2 * t.sigma2 *
                 t.sigma2 * t.eta_cap * t.eta_cap;
  t.big_k3 = 20.0 * cfg.kappa * cfg.kappa;
  t.big_k4 = 2.0 * (20.0 * cfg.c * cfg.c * sa2 + 1.0);

  t.c1 = 1.0 / (2.0 * cfg.gamma) +
         (6.0 * L + 8.0 * t.tau + cfg.kappa * (1.0 - cfg.beta)) /
             (4.0 * std::pow(cfg.gamma + 2.0 * cfg.c + cfg.kappa, 2));
  t.c0 = (t.s_hat1 > 0.0 ? 2.0 * t.big_k1 / t.s_hat1 : inf) +
         (t.s_hat2 > 0.0 ? t.big_k2 / t.s_hat2 : inf) +
         4.0 * t.big_k3 * cfg.beta / (cfg.kappa * (1.0 - cfg.beta)) +
         2.0 * t.big_k4 / cfg.alpha;

  t.alpha_ok = cfg.alpha <= t.alpha_cap;
  t.beta_ok = cfg.beta < t.beta_cap;
  t.feasible = t.curvature_ok && t.momentum_ok && t.alpha_ok && t.beta_ok;
  if (!t.alpha_ok)
    t.violated = "alpha <= alpha_cap";
  else if (!t.beta_ok)
    t.violated = "beta < beta_cap";
  return t;
}

inline TheoryConstants theory_constants(const SolverConfig& cfg,
                                        const ProblemInstance& problem,
                                        const Graph& g, double sigma5 = 1.0) {
  const IncidencePair inc = incidence_matrices(g);
  const double sigma_a = spectral_norm(inc.signed_incidence);
  double eta_run = 0.0;
  switch (cfg.momentum) {
    case MomentumKind::zero: eta_run = 0.0; break;
    case MomentumKind::constant: eta_run = cfg.eta; break;
    case MomentumKind::nesterov:
      // the accelerated schedule tends to 1 and leaves the admissible band;
      // evaluate the constants at the cap itself
      eta_run = std::numeric_limits<double>::infinity();
      break;
  }
  TheoryConstants t = theory_constants(
      cfg, problem.lipschitz, problem.weak_convexity, sigma_a, g.max_degree(),
      sigma5, std::isfinite(eta_run) ? eta_run : 1.0);
  if (cfg.momentum == MomentumKind::nesterov) {
    t.momentum_ok = false;
    t.feasible = false;
    if (t.violated.empty()) t.violated = "eta <= eta_cap";
  }
  return t;
}

// --------------------------------------------------------------------------
// Potential function
//
//   phi^k = L_c(x^k, z^k; lambda^k) + tau ||x^k - x^{k-1}||^2
//           + 2 P(z^k) - 2 d(z^k; lambda^k),
// where d minimizes the augmented Lagrangian over x and P solves the
// consensus-constrained proximal problem.  Both inner problems are strongly
// convex for kappa > -mu and are solved by proximal gradient descent; P gets
// a multiplier/penalty sweep until the consensus residual is small.  The
// evaluator keeps warm starts since consecutive calls move very little.

struct PotentialSettings {
  double inner_tolerance = 1e-10;   // gradient-map norm target
  double feasibility_tolerance = 1e-9;  // ||A x|| target inside P
  int max_inner_iterations = 200000;
  int max_sweeps = 60;
};

class PotentialEvaluator {
 public:
  PotentialEvaluator(const ProblemInstance& problem, const Graph& g,
                     const SolverConfig& cfg, double tau,
                     PotentialSettings settings = {})
      : problem_(problem),
        cfg_(cfg),
        tau_(tau),
        settings_(settings),
        inc_(incidence_matrices(g)),
        laplacian_(inc_.laplacian()),
        sigma_a_(spectral_norm(inc_.signed_incidence)) {
    if (cfg.kappa + problem.weak_convexity <= 0.0)
      throw InfeasibleParameters(
          "potential needs kappa > -mu for strongly convex inner problems");
    const int n = problem.dim;
    warm_dual_ = Mat::Zero(g.nodes, n);
    warm_constrained_ = Mat::Zero(g.nodes, n);
    warm_multiplier_ = Mat::Zero(g.nodes, n);
    warm_penalty_ = cfg.c;
  }

  // Augmented Lagrangian value with the dual expressed as p = A'lambda.
  double augmented_lagrangian(const Mat& x, const Mat& z,
                              const Mat& dual_image) const {
    return problem_.smooth_value(x) + problem_.regularizer_value(x) +
           (dual_image.array() * x.array()).sum() +
           0.5 * cfg_.c * consensus_violation_sq(inc_, x) +
           0.5 * cfg_.kappa * (x - z).squaredNorm();
  }

  // d(z; lambda) = min_x L_c(x, z; lambda)
  double dual_value(const Mat& z, const Mat& dual_image) {
    warm_dual_ = minimize(cfg_.c, dual_image, z, std::move(warm_dual_));
    return augmented_lagrangian(warm_dual_, z, dual_image);
  }

  // P(z) = min_{Ax=0} f(x) + r(x) + (kappa/2)||x - z||^2 via a multiplier
  // sweep with doubling penalty.
  double constrained_value(const Mat& z) {
    double feas = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < settings_.max_sweeps; ++sweep) {
      warm_constrained_ = minimize(warm_penalty_, warm_multiplier_, z,
                                   std::move(warm_constrained_));
      const double next_feas =
          std::sqrt(consensus_violation_sq(inc_, warm_constrained_));
      if (next_feas <= settings_.feasibility_tolerance) {
        return problem_.smooth_value(warm_constrained_) +
               problem_.regularizer_value(warm_constrained_) +
               0.5 * cfg_.kappa * (warm_constrained_ - z).squaredNorm();
      }
      warm_multiplier_ += warm_penalty_ * (laplacian_ * warm_constrained_);
      if (next_feas > 0.25 * feas) warm_penalty_ = std::min(warm_penalty_ * 2.0, 1e12);
      feas = next_feas;
    }
    throw InnerSolverDiverged("constrained inner solve did not reach " +
                              std::to_string(settings_.feasibility_tolerance));
  }

  double phi(const Mat& x, const Mat& x_prev, const Mat& z,
             const Mat& dual_image) {
    return augmented_lagrangian(x, z, dual_image) +
           tau_ * (x - x_prev).squaredNorm() + 2.0 * constrained_value(z) -
           2.0 * dual_value(z, dual_image);
  }

  double tau() const { return tau_; }

 private:
  // minimize f(x) + r(x) + <p, x> + (pen/2)||A x||^2 + (kappa/2)||x - z||^2
  // Accelerated proximal gradient with the constant strong-convexity
  // extrapolation; the step uses the certified curvature bound so it stays
  // valid when the reported L is optimistic.
  Mat minimize(double pen, const Mat& p, const Mat& z, Mat x) const {
    const double smooth_lipschitz =
        std::max(problem_.lipschitz, problem_.certified_lipschitz()) +
        pen * sigma_a_ * sigma_a_ + cfg_.kappa;
    const double strong_convexity =
        cfg_.kappa + std::min(problem_.weak_convexity,
                              problem_.certified_weak_convexity());
    const double step = 1.0 / smooth_lipschitz;
    const double ratio = std::sqrt(std::max(strong_convexity, 1e-12) /
                                   smooth_lipschitz);
    const double extrapolation = (1.0 - ratio) / (1.0 + ratio);

    Mat y = x;
    Mat x_prev = x;
    for (int it = 0; it < settings_.max_inner_iterations; ++it) {
      const Mat grad = problem_.smooth_gradient(y) + p +
                       pen * (laplacian_ * y) + cfg_.kappa * (y - z);
      Mat proposal = y - step * grad;
      Mat next(x.rows(), x.cols());
      for (int i = 0; i < problem_.agents(); ++i)
        next.row(i) = problem_.regularizer_term(i)
                          .prox(proposal.row(i).transpose(), 1.0 / step)
                          .transpose();
      const double map_norm = (y - next).norm() / step;
      if (map_norm <= settings_.inner_tolerance) return next;
      x_prev = std::move(x);
      x = std::move(next);
      y = x + extrapolation * (x - x_prev);
    }
    throw InnerSolverDiverged("proximal-gradient inner solve stalled");
  }

  const ProblemInstance& problem_;
  SolverConfig cfg_;
  double tau_;
  PotentialSettings settings_;
  IncidencePair inc_;
  Mat laplacian_;
  double sigma_a_;

  Mat warm_dual_;
  Mat warm_constrained_;
  Mat warm_multiplier_;  // p-image of the sweep multiplier
  double warm_penalty_;
};

// --------------------------------------------------------------------------
// Mini-batch deviation bound
//
// One stochastic round against the same round with exact gradients, repeated
// over fresh draws:  E||x^{k+1} - xhat^{k+1}||^2 <= N sigma^2 / ((gamma+2c+kappa)^2 |I|).

struct VarianceReport {
  double empirical = 0.0;
  double bound = 0.0;
  double sample_variance = 0.0;
  int trials = 0;
  bool pass = false;
};

inline VarianceReport variance_bound_check(const ProblemInstance& problem,
                                           const Graph& g,
                                           const SolverConfig& cfg,
                                           const Mat& x0, int trials,
                                           double slack = 0.25) {
  SolverConfig base = cfg;
  base.iterations = 2;

  SolverState start = sppdm_init(problem, g, base, x0);

  // exact-gradient round
  SolverConfig full_cfg = base;
  full_cfg.batch = kFullBatch;
  SolverState exact = start;
  sppdm_step(exact, problem, g, full_cfg);

  // sigma^2 at the very point the draws happen (the round-1 momentum point)
  Mat s1(start.x.rows(), start.x.cols());
  {
    const double eta = base.eta_at(1);
    s1 = start.x + eta * (start.x - start.x_prev);
  }
  const double sigma2 = estimate_sample_variance(problem, s1);

  VarianceReport report;
  report.trials = trials;
  report.sample_variance = sigma2;
  const double denom = cfg.gamma + 2.0 * cfg.c + cfg.kappa;
  report.bound = problem.agents() * sigma2 /
                 (denom * denom * std::max(1, cfg.batch));

  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    SolverConfig trial_cfg = base;
    trial_cfg.seed = mix_key(cfg.seed, 0x7472ULL, static_cast<std::uint64_t>(t));
    SolverState st = start;
    sppdm_step(st, problem, g, trial_cfg);
    acc += (st.x - exact.x).squaredNorm();
  }
  report.empirical = trials > 0 ? acc / trials : 0.0;
  report.pass = report.empirical <= report.bound * (1.0 + slack);
  return report;
}

// --------------------------------------------------------------------------
// Rate fit

struct RateReport {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
  bool pass = false;
};

// Least-squares fit of log(min_{k<=K} q_k) against log K over a log-spaced
// grid of K in [k_min, k_max].
inline RateReport rate_check(const std::vector<double>& q, int k_min,
                             int k_max, double slope_threshold = -0.9) {
  if (static_cast<int>(q.size()) <= k_min || k_min < 1 || k_max <= k_min)
    throw InsufficientData("trace too short for the requested fit window");
  k_max = std::min(k_max, static_cast<int>(q.size()) - 1);

  std::vector<double> running(q.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i) {
    best = std::min(best, q[i]);
    running[i] = best;
  }

  constexpr int kGrid = 25;
  std::vector<std::pair<double, double>> pts;
  int last_k = -1;
  for (int gidx = 0; gidx < kGrid; ++gidx) {
    const double frac = static_cast<double>(gidx) / (kGrid - 1);
    const int k = static_cast<int>(std::lround(
        std::exp(std::log(static_cast<double>(k_min)) +
                 frac * (std::log(static_cast<double>(k_max)) -
                         std::log(static_cast<double>(k_min))))));
    if (k == last_k) continue;
    last_k = k;
    const double v = std::max(running[static_cast<std::size_t>(k)], 1e-300);
    pts.emplace_back(std::log(static_cast<double>(k)), std::log(v));
  }
  if (pts.size() < 3) throw InsufficientData("fewer than 3 fit points");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [a, b] : pts) {
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double n = static_cast<double>(pts.size());
  RateReport r;
  r.points = static_cast<int>(pts.size());
  const double denom = n * sxx - sx * sx;
  r.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  r.intercept = (sy - r.slope * sx) / n;
  r.pass = r.slope <= slope_threshold;
  return r;
}

// Mean of the last `fraction` of a metric column; the noise floor a
// stochastic run settles at.
inline double plateau_level(const std::vector<double>& values,
                            double fraction = 0.1) {
  if (values.empty()) throw InsufficientData("empty trace");
  const auto tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(values.size() * fraction)));
  double acc = 0.0;
  for (std::size_t i = values.size() - tail; i < values.size(); ++i)
    acc += values[i];
  return acc / static_cast<double>(tail);
}

// First iteration whose running-min optimality gap drops below eps.
inline int iterations_to_threshold(const std::vector<double>& q, double eps) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i) {
    best = std::min(best, q[i]);
    if (best <= eps) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace sppdm

#endif  // SPPDM_METRICS_HPP
