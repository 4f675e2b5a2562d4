#ifndef SPPDM_ORACLES_HPP
#define SPPDM_ORACLES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "sppdm/errors.hpp"
#include "sppdm/graph.hpp"
#include "sppdm/rng.hpp"

namespace sppdm {

constexpr int kFullBatch = 0;  // batch size 0 requests the exact gradient

// Smooth (possibly nonconvex) local cost with a sampled structure.  Mini
// batches are drawn with replacement through a counter-based stream, so a
// draw is reproducible from (seed, agent, iteration, slot) alone.
class SmoothTerm {
 public:
  virtual ~SmoothTerm() = default;

  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;

  // Gradient of the j-th sample's cost.  Terms without a sample structure
  // (sample_count() == 0) only support full gradients.
  virtual Vec sample_gradient(const Vec& x, int j) const {
    (void)j;
    return gradient(x);
  }
  virtual int sample_count() const { return 0; }

  virtual int dim() const = 0;

  // Certified bounds on the Hessian spectrum, valid everywhere: gradient is
  // curvature_bound()-Lipschitz and the term is curvature_lower_bound()
  // weakly convex.  Inner solvers rely on these, not on the looser
  // constants a problem may report.
  virtual double curvature_bound() const = 0;
  virtual double curvature_lower_bound() const { return -curvature_bound(); }
};

Vec stochastic_gradient(const SmoothTerm& term, const Vec& x,
                        const StreamKey& key, int batch);

// Convex non-smooth regularizer with an exact proximal map
//   prox(v, w) = argmin_u  (w/2) ||v - u||^2 + r(u).
class NonsmoothTerm {
 public:
  virtual ~NonsmoothTerm() = default;

  virtual double value(const Vec& x) const = 0;
  virtual Vec prox(const Vec& v, double weight) const = 0;
};

// Polyhedral description of an epigraph: r(x) <= y  iff  Sx x + Sy y >= z.
struct EpigraphWitness {
  Mat coeff_x;  // q x n
  Vec coeff_y;  // q
  Vec offset;   // q
};

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// --------------------------------------------------------------------------
// Smooth terms

// Truncated regression loss  (rho / 2m) sum_j log(1 + (y_j - h_j'x)^2 / rho).
// Saturating for large residuals, hence nonconvex.
class TruncatedLoss final : public SmoothTerm {
 public:
  TruncatedLoss(Mat features, Vec responses, double rho)
      : features_(std::move(features)),
        responses_(std::move(responses)),
        rho_(rho) {
    if (rho_ <= 0.0) throw BadParameters("truncated loss needs rho > 0");
    if (features_.rows() != responses_.size())
      throw DimensionMismatch("feature rows != response length");
    if (features_.rows() == 0) throw BadSizes("empty dataset");
    // Per-sample curvature factor rho(rho - r^2)/(rho + r^2)^2 lies in
    // [-1/8, 1], so the Hessian spectrum sits inside
    // [-s/8, s] with s = lambda_max(H'H)/m.
    gram_norm_ = spectral_norm(features_);
    gram_norm_ = gram_norm_ * gram_norm_ / static_cast<double>(features_.rows());
  }

  double value(const Vec& x) const override {
    check_dim(x);
    const Vec residual = features_ * x - responses_;
    double total = 0.0;
    for (Eigen::Index j = 0; j < residual.size(); ++j)
      total += std::log1p(residual[j] * residual[j] / rho_);
    return 0.5 * rho_ * total / static_cast<double>(features_.rows());
  }

  Vec gradient(const Vec& x) const override {
    check_dim(x);
    const Vec residual = features_ * x - responses_;
    // d/dr of (rho/2) log(1 + r^2/rho) is  r * rho / (rho + r^2)
    Vec scaled(residual.size());
    for (Eigen::Index j = 0; j < residual.size(); ++j)
      scaled[j] = residual[j] * rho_ / (rho_ + residual[j] * residual[j]);
    return features_.transpose() * scaled /
           static_cast<double>(features_.rows());
  }

  Vec sample_gradient(const Vec& x, int j) const override {
    check_dim(x);
    const double r = features_.row(j).dot(x) - responses_[j];
    return features_.row(j).transpose() * (r * rho_ / (rho_ + r * r));
  }

  int sample_count() const override {
    return static_cast<int>(features_.rows());
  }
  int dim() const override { return static_cast<int>(features_.cols()); }

  double curvature_bound() const override { return gram_norm_; }
  double curvature_lower_bound() const override { return -gram_norm_ / 8.0; }

  const Mat& features() const { return features_; }
  const Vec& responses() const { return responses_; }
  double rho() const { return rho_; }

 private:
  void check_dim(const Vec& x) const {
    if (x.size() != features_.cols())
      throw DimensionMismatch("point has wrong dimension");
  }

  Mat features_;  // m x n
  Vec responses_;
  double rho_;
  double gram_norm_ = 0.0;
};

// Convenience free functions mirroring the loss formulas (used by tests and
// by callers that hold raw data).
inline double truncated_loss_value(const Mat& features, const Vec& responses,
                                   const Vec& x, double rho) {
  return TruncatedLoss(features, responses, rho).value(x);
}

inline Vec truncated_loss_gradient(const Mat& features, const Vec& responses,
                                   const Vec& x, double rho) {
  return TruncatedLoss(features, responses, rho).gradient(x);
}

// Quadratic (1/2) x'Qx + b'x, optionally with a per-sample decomposition:
// sample j contributes (1/2) x'Qx + b'x + <noise_j, x> with noise summing
// to zero, which gives a cheap oracle with controllable gradient variance.
class QuadraticTerm final : public SmoothTerm {
 public:
  QuadraticTerm(Mat quadratic, Vec linear)
      : quadratic_(std::move(quadratic)), linear_(std::move(linear)) {
    if (quadratic_.rows() != quadratic_.cols() ||
        quadratic_.rows() != linear_.size())
      throw DimensionMismatch("quadratic term shape mismatch");
  }

  static QuadraticTerm isotropic(int n, double curvature = 1.0) {
    return QuadraticTerm(curvature * Mat::Identity(n, n), Vec::Zero(n));
  }

  void set_sample_noise(Mat noise) {
    if (noise.cols() != linear_.size())
      throw DimensionMismatch("noise width != dim");
    // recentre so the mean over samples is the exact gradient
    noise.rowwise() -= noise.colwise().mean();
    sample_noise_ = std::move(noise);
  }

  double value(const Vec& x) const override {
    return 0.5 * x.dot(quadratic_ * x) + linear_.dot(x);
  }
  Vec gradient(const Vec& x) const override {
    return quadratic_ * x + linear_;
  }
  Vec sample_gradient(const Vec& x, int j) const override {
    if (sample_noise_.rows() == 0) return gradient(x);
    return gradient(x) + sample_noise_.row(j).transpose();
  }
  int sample_count() const override {
    return static_cast<int>(sample_noise_.rows());
  }
  int dim() const override { return static_cast<int>(linear_.size()); }

  double curvature_bound() const override {
    return spectral_norm(quadratic_);
  }
  double curvature_lower_bound() const override {
    // exact for symmetric quadratics
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (quadratic_ + quadratic_.transpose()));
    return es.eigenvalues().minCoeff();
  }

 private:
  Mat quadratic_;
  Vec linear_;
  Mat sample_noise_;  // empty => deterministic oracle
};

// Mini-batch gradient estimate: mean of `batch` per-sample gradients drawn
// with replacement.  batch == kFullBatch returns the exact gradient, which
// is also the only choice for terms without samples.
inline Vec stochastic_gradient(const SmoothTerm& term, const Vec& x,
                               const StreamKey& key, int batch) {
  if (batch == kFullBatch || term.sample_count() == 0) return term.gradient(x);
  if (batch < 0) throw EmptyBatch("batch size must be positive");
  const auto m = static_cast<std::uint64_t>(term.sample_count());
  Vec acc = Vec::Zero(x.size());
  for (int j = 0; j < batch; ++j) {
    const int idx = static_cast<int>(key.draw(static_cast<std::uint64_t>(j)) % m);
    acc += term.sample_gradient(x, idx);
  }
  return acc / static_cast<double>(batch);
}

// --------------------------------------------------------------------------
// Non-smooth terms

// r(x) = 0; prox is the identity.
class ZeroRegularizer final : public NonsmoothTerm {
 public:
  double value(const Vec&) const override { return 0.0; }
  Vec prox(const Vec& v, double) const override { return v; }
};

// r(x) = weight * ||x||_1 + indicator of the box [lo, hi]^n.  Separable, so
// the prox is coordinatewise soft-threshold followed by the box clamp
// (valid because the box contains the origin).
class L1BoxRegularizer final : public NonsmoothTerm {
 public:
  L1BoxRegularizer(double weight, double lo, double hi)
      : weight_(weight), lo_(lo), hi_(hi) {
    if (weight_ < 0.0) throw BadParameters("l1 weight must be >= 0");
    if (lo_ > 0.0 || hi_ < 0.0)
      throw BadParameters("box must contain the origin");
  }

  static L1BoxRegularizer l1_only(double weight) {
    return L1BoxRegularizer(weight, -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity());
  }
  static L1BoxRegularizer box_only(double lo, double hi) {
    return L1BoxRegularizer(0.0, lo, hi);
  }

  double value(const Vec& x) const override {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < lo_ || x[i] > hi_)
        return std::numeric_limits<double>::infinity();
    return weight_ * x.lpNorm<1>();
  }

  Vec prox(const Vec& v, double prox_weight) const override {
    if (prox_weight <= 0.0)
      throw BadParameters("prox weight must be positive");
    const double t = weight_ / prox_weight;
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      out[i] = std::clamp(soft_threshold(v[i], t), lo_, hi_);
    return out;
  }

  double l1_weight() const { return weight_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  double weight_;
  double lo_, hi_;
};

// Free-function form of the l1+box prox used throughout the solvers.
inline Vec prox_l1_box(const Vec& v, double prox_weight, double l1_weight,
                       double lo, double hi) {
  return L1BoxRegularizer(l1_weight, lo, hi).prox(v, prox_weight);
}

// Polyhedral epigraph description for the supported regularizers.  The l1
// part contributes one row per sign pattern (2^n rows), so this is meant
// for small dimensions; the box rows carry a zero y-coefficient.
inline EpigraphWitness epigraph_witness(const NonsmoothTerm& r, int n) {
  if (n < 1) throw BadParameters("dimension must be positive");
  if (dynamic_cast<const ZeroRegularizer*>(&r) != nullptr) {
    EpigraphWitness w;
    w.coeff_x = Mat::Zero(1, n);
    w.coeff_y = Vec::Ones(1);
    w.offset = Vec::Zero(1);
    return w;
  }
  const auto* l1box = dynamic_cast<const L1BoxRegularizer*>(&r);
  if (l1box == nullptr)
    throw NotPolyhedral("no polyhedral witness for this regularizer");
  if (n > 20) throw BadSizes("epigraph witness needs 2^n rows; n too large");

  std::vector<Vec> rows_x;
  std::vector<double> rows_y;
  std::vector<double> offsets;

  const double weight = l1box->l1_weight();
  if (weight > 0.0) {
    // weight * s'x <= y for every sign vector s
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t bits = 0; bits < patterns; ++bits) {
      Vec row(n);
      for (int i = 0; i < n; ++i)
        row[i] = (bits >> i) & 1 ? -weight : weight;
      rows_x.push_back(-row);  // -weight * s'x + y >= 0
      rows_y.push_back(1.0);
      offsets.push_back(0.0);
    }
  } else {
    rows_x.push_back(Vec::Zero(n));  // r == 0 on the box: y >= 0
    rows_y.push_back(1.0);
    offsets.push_back(0.0);
  }
  if (std::isfinite(l1box->lower())) {
    for (int i = 0; i < n; ++i) {
      Vec row = Vec::Zero(n);
      row[i] = 1.0;  // x_i >= lo
      rows_x.push_back(row);
      rows_y.push_back(0.0);
      offsets.push_back(l1box->lower());
    }
  }
  if (std::isfinite(l1box->upper())) {
    for (int i = 0; i < n; ++i) {
      Vec row = Vec::Zero(n);
      row[i] = -1.0;  // -x_i >= -hi
      rows_x.push_back(row);
      rows_y.push_back(0.0);
      offsets.push_back(-l1box->upper());
    }
  }

  EpigraphWitness w;
  const auto q = static_cast<Eigen::Index>(rows_x.size());
  w.coeff_x.resize(q, n);
  w.coeff_y.resize(q);
  w.offset.resize(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    w.coeff_x.row(k) = rows_x[static_cast<std::size_t>(k)];
    w.coeff_y[k] = rows_y[static_cast<std::size_t>(k)];
    w.offset[k] = offsets[static_cast<std::size_t>(k)];
  }
  return w;
}

// --------------------------------------------------------------------------
// Problem assembly

// Per-agent objective pieces plus the constants the convergence conditions
// are stated with.  L and mu refer to the stacked objective (max over
// agents); they default conservatively and can be overridden per problem.
struct ProblemInstance {
  std::vector<std::shared_ptr<const SmoothTerm>> smooth;
  std::vector<std::shared_ptr<const NonsmoothTerm>> regularizer;
  int dim = 0;
  double lipschitz = 1.0;        // L
  double weak_convexity = -1.0;  // mu >= -L
  double sample_variance = 0.0;  // sigma^2 (per-sample bound or estimate)
  double objective_floor = 0.0;  // known lower bound on f + r

  int agents() const { return static_cast<int>(smooth.size()); }

  const SmoothTerm& smooth_term(int i) const {
    return *smooth[static_cast<std::size_t>(i)];
  }
  const NonsmoothTerm& regularizer_term(int i) const {
    return *regularizer[static_cast<std::size_t>(i)];
  }

  // value / gradient of the stacked smooth part; rows index agents
  double smooth_value(const Mat& x) const {
    double total = 0.0;
    for (int i = 0; i < agents(); ++i)
      total += smooth_term(i).value(x.row(i).transpose());
    return total;
  }
  Mat smooth_gradient(const Mat& x) const {
    Mat g(x.rows(), x.cols());
    for (int i = 0; i < agents(); ++i)
      g.row(i) = smooth_term(i).gradient(x.row(i).transpose()).transpose();
    return g;
  }
  double regularizer_value(const Mat& x) const {
    double total = 0.0;
    for (int i = 0; i < agents(); ++i)
      total += regularizer_term(i).value(x.row(i).transpose());
    return total;
  }

  // Certified spectrum bounds of the stacked smooth part.
  double certified_lipschitz() const {
    double worst = 0.0;
    for (const auto& t : smooth) worst = std::max(worst, t->curvature_bound());
    return worst;
  }
  double certified_weak_convexity() const {
    double worst = 0.0;
    for (const auto& t : smooth)
      worst = std::min(worst, t->curvature_lower_bound());
    return worst;
  }
};

// Synthetic per-agent regression data y = H x* + noise.
struct RegressionDataset {
  std::vector<Mat> features;   // one m x n block per agent
  std::vector<Vec> responses;  // one m-vector per agent
  Vec ground_truth;            // n, S-sparse
  double noise_sd = 0.0;
};

struct RegressionSpec {
  int agents = 5;
  int samples_per_agent = 20;
  int dim = 32;
  int sparsity = 4;
  double rho = 3.0;
  double noise_sd = 2.0;
  double l1_weight = 0.01;
  double box_lo = -1.0;
  double box_hi = 1.0;
  double lipschitz = 1.0;
  double weak_convexity = -1.0;
};

// Sample variance of per-sample gradients around the full gradient,
// maximized over agents; used when no sigma^2 is supplied.  Callers that
// know the run's initial point typically re-estimate there.
inline double estimate_sample_variance(const ProblemInstance& p,
                                       const Mat& at) {
  double worst = 0.0;
  for (int i = 0; i < p.agents(); ++i) {
    const auto& term = p.smooth_term(i);
    const int m = term.sample_count();
    if (m == 0) continue;
    const Vec x = at.row(i).transpose();
    const Vec mean = term.gradient(x);
    double acc = 0.0;
    for (int j = 0; j < m; ++j)
      acc += (term.sample_gradient(x, j) - mean).squaredNorm();
    worst = std::max(worst, acc / static_cast<double>(m));
  }
  return worst;
}

struct GeneratedProblem {
  ProblemInstance problem;
  RegressionDataset dataset;
};

// Draws the regression instance of the experiment section: standard
// Gaussian features, S-sparse ground truth with U[-1,1] nonzeros, Gaussian
// noise, truncated loss + l1-in-a-box objective.  Fully determined by the
// seed.
inline GeneratedProblem generate_regression(std::uint64_t seed,
                                            const RegressionSpec& spec) {
  if (spec.agents < 1 || spec.samples_per_agent < 1 || spec.dim < 1)
    throw BadSizes("all sizes must be positive");
  if (spec.sparsity < 0 || spec.sparsity > spec.dim)
    throw BadSizes("sparsity must lie in [0, dim]");

  GeneratedProblem out;
  auto& ds = out.dataset;
  ds.noise_sd = spec.noise_sd;

  // support via partial Fisher-Yates, values U[-1,1]
  Prng truth_rng(seed, 0x7472757468ULL);  // "truth"
  std::vector<int> perm(static_cast<std::size_t>(spec.dim));
  for (int i = 0; i < spec.dim; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < spec.sparsity; ++i) {
    const auto j = i + static_cast<int>(truth_rng.below(
                           static_cast<std::uint64_t>(spec.dim - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  ds.ground_truth = Vec::Zero(spec.dim);
  for (int i = 0; i < spec.sparsity; ++i)
    ds.ground_truth[perm[static_cast<std::size_t>(i)]] =
        truth_rng.uniform(-1.0, 1.0);

  out.problem.dim = spec.dim;
  out.problem.lipschitz = spec.lipschitz;
  out.problem.weak_convexity = spec.weak_convexity;
  out.problem.objective_floor = 0.0;  // loss and regularizer are nonnegative

  for (int a = 0; a < spec.agents; ++a) {
    Prng agent_rng(seed, 0x64617461ULL, static_cast<std::uint64_t>(a));  // "data"
    Mat h(spec.samples_per_agent, spec.dim);
    for (Eigen::Index r = 0; r < h.rows(); ++r)
      for (Eigen::Index c = 0; c < h.cols(); ++c) h(r, c) = agent_rng.gaussian();
    Vec noise(spec.samples_per_agent);
    for (Eigen::Index r = 0; r < noise.size(); ++r)
      noise[r] = spec.noise_sd * agent_rng.gaussian();
    Vec y = h * ds.ground_truth + noise;

    ds.features.push_back(h);
    ds.responses.push_back(y);
    out.problem.smooth.push_back(
        std::make_shared<TruncatedLoss>(h, y, spec.rho));
    out.problem.regularizer.push_back(std::make_shared<L1BoxRegularizer>(
        spec.l1_weight, spec.box_lo, spec.box_hi));
  }

  out.problem.sample_variance =
      estimate_sample_variance(out.problem, Mat::Zero(spec.agents, spec.dim));
  return out;
}

// Random initial point; coordinates U[-0.1, 0.1] (not pinned by any
// reported experiment, see README).
inline Mat random_initial_point(std::uint64_t seed, int agents, int dim) {
  Prng rng(seed, 0x696e6974ULL);  // "init"
  Mat x0(agents, dim);
  for (Eigen::Index r = 0; r < x0.rows(); ++r)
    for (Eigen::Index c = 0; c < x0.cols(); ++c)
      x0(r, c) = rng.uniform(-0.1, 0.1);
  return x0;
}

}  // namespace sppdm

#endif  // SPPDM_ORACLES_HPP
