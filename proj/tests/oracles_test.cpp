#include "sppdm/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace sppdm;

namespace {

// independent per-sample re-implementation of the truncated loss
double per_sample_loss_sum(const Mat& h, const Vec& y, const Vec& x,
                           double rho) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < h.rows(); ++j) {
    const double r = h.row(j).dot(x) - y[j];
    total += (rho / 2.0) * std::log(1.0 + r * r / rho);
  }
  return total / static_cast<double>(h.rows());
}

}  // namespace

TEST(TruncatedLoss, ZeroResidualsGiveZero) {
  Mat h(3, 2);
  h << 1, 0, 0, 1, 1, 1;
  Vec x(2);
  x << 0.3, -0.7;
  const Vec y = h * x;  // exact fit
  EXPECT_DOUBLE_EQ(truncated_loss_value(h, y, x, 3.0), 0.0);
  EXPECT_EQ(truncated_loss_gradient(h, y, x, 3.0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TruncatedLoss, SingleSampleAtTruncationKnee) {
  // residual^2 == rho  =>  value is (rho/2) log 2
  const double rho = 3.0;
  Mat h(1, 1);
  h << 1.0;
  Vec y(1);
  y << 0.0;
  Vec x(1);
  x << std::sqrt(rho);
  EXPECT_NEAR(truncated_loss_value(h, y, x, rho), rho / 2.0 * std::log(2.0),
              1e-15);
}

TEST(TruncatedLoss, MatchesPerSampleReimplementation) {
  Prng rng(3, 0x74ULL);
  Mat h(7, 4);
  Vec y(7);
  for (Eigen::Index r = 0; r < 7; ++r) {
    for (Eigen::Index c = 0; c < 4; ++c) h(r, c) = rng.gaussian();
    y[r] = rng.gaussian();
  }
  Vec x(4);
  for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
  EXPECT_NEAR(truncated_loss_value(h, y, x, 3.0),
              per_sample_loss_sum(h, y, x, 3.0), 1e-12);
}

TEST(TruncatedLoss, GradientMatchesFiniteDifferences) {
  const auto gen = testsupport::desk_problem(17, 3, 10, 6, 2);
  Prng rng(18, 0x6664ULL);
  for (int point = 0; point < 20; ++point) {
    const auto& term = gen.problem.smooth_term(point % 3);
    Vec x(6);
    for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-1.5, 1.5);
    const Vec grad = term.gradient(x);
    const Vec fd = testsupport::fd_gradient(
        [&](const Vec& p) { return term.value(p); }, x);
    EXPECT_LE((grad - fd).norm() / std::max(1.0, grad.norm()), 1e-5)
        << "point " << point;
  }
}

TEST(TruncatedLoss, LipschitzEstimateBelowOneAtReferenceParameters) {
  // standardized Gaussian data, rho = 3, noise sd 2: difference quotients of
  // the gradient over box points stay below 1
  RegressionSpec spec;
  spec.agents = 1;
  spec.samples_per_agent = 150;
  spec.dim = 256;
  spec.sparsity = 16;
  spec.rho = 3.0;
  spec.noise_sd = 2.0;
  const auto gen = generate_regression(2718, spec);
  const auto& term = gen.problem.smooth_term(0);
  Prng rng(2719, 0x6cULL);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    Vec a(spec.dim), b(spec.dim);
    for (int i = 0; i < spec.dim; ++i) {
      a[i] = rng.uniform(-1.0, 1.0);
      b[i] = rng.uniform(-1.0, 1.0);
    }
    const double ratio =
        (term.gradient(a) - term.gradient(b)).norm() / (a - b).norm();
    worst = std::max(worst, ratio);
  }
  EXPECT_LE(worst, 1.0);
}

TEST(TruncatedLoss, WeakConvexityHoldsWithReportedConstant) {
  const auto gen = testsupport::desk_problem(23, 3, 12, 8, 3);
  const double mu = gen.problem.weak_convexity;
  ASSERT_GE(mu, -gen.problem.lipschitz);  // mu >= -L
  Prng rng(24, 0x7763ULL);
  for (int pair = 0; pair < 1000; ++pair) {
    const auto& term = gen.problem.smooth_term(pair % 3);
    Vec x(8), y(8);
    for (int i = 0; i < 8; ++i) {
      x[i] = rng.uniform(-2.0, 2.0);
      y[i] = rng.uniform(-2.0, 2.0);
    }
    const double lhs =
        term.value(x) - term.value(y) - term.gradient(y).dot(x - y);
    EXPECT_GE(lhs, 0.5 * mu * (x - y).squaredNorm() - 1e-9) << "pair " << pair;
  }
}

TEST(TruncatedLoss, CertifiedCurvatureBoundsHold) {
  const auto gen = testsupport::desk_problem(29, 2, 15, 6, 2);
  Prng rng(30, 0x6375ULL);
  const double cap = gen.problem.certified_lipschitz();
  const double floor = gen.problem.certified_weak_convexity();
  for (int pair = 0; pair < 200; ++pair) {
    const auto& term = gen.problem.smooth_term(pair % 2);
    Vec x(6), y(6);
    for (int i = 0; i < 6; ++i) {
      x[i] = rng.uniform(-3.0, 3.0);
      y[i] = rng.uniform(-3.0, 3.0);
    }
    const double ratio =
        (term.gradient(x) - term.gradient(y)).norm() / (x - y).norm();
    EXPECT_LE(ratio, cap * (1.0 + 1e-9));
    const double lower = term.value(x) - term.value(y) -
                         term.gradient(y).dot(x - y);
    EXPECT_GE(lower, 0.5 * floor * (x - y).squaredNorm() - 1e-9);
  }
}

// ---------------------------------------------------------------------------

TEST(StochasticGradient, FullPassFlagEqualsGradientExactly) {
  const auto gen = testsupport::desk_problem(31, 2, 9, 5, 2);
  const auto& term = gen.problem.smooth_term(0);
  Vec x(5);
  x << 0.1, -0.2, 0.3, 0.0, -0.5;
  const Vec full = term.gradient(x);
  const Vec flagged =
      stochastic_gradient(term, x, StreamKey{1, 0, 1}, kFullBatch);
  EXPECT_EQ(full, flagged);
}

TEST(StochasticGradient, EmptyBatchRejected) {
  const auto gen = testsupport::desk_problem(32, 1, 5, 3, 1);
  Vec x = Vec::Zero(3);
  EXPECT_THROW(
      stochastic_gradient(gen.problem.smooth_term(0), x, StreamKey{}, -1),
      EmptyBatch);
}

TEST(StochasticGradient, UnbiasedOverManyDraws) {
  for (std::uint64_t seed : {101ULL, 102ULL, 103ULL}) {
    const auto gen = testsupport::desk_problem(seed, 1, 12, 4, 2);
    const auto& term = gen.problem.smooth_term(0);
    Vec x(4);
    Prng rng(seed, 0x78ULL);
    for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1.0, 1.0);
    const Vec full = term.gradient(x);

    // per-coordinate standard deviation of single-sample gradients (oracle)
    const int m = term.sample_count();
    Vec var = Vec::Zero(4);
    for (int j = 0; j < m; ++j)
      var += (term.sample_gradient(x, j) - full).cwiseAbs2();
    var /= static_cast<double>(m);

    const int draws = 10000;
    const int batch = 2;
    Vec mean = Vec::Zero(4);
    for (int t = 0; t < draws; ++t)
      mean += stochastic_gradient(
          term, x, StreamKey{seed, 0, static_cast<std::uint64_t>(t)}, batch);
    mean /= static_cast<double>(draws);

    for (int i = 0; i < 4; ++i) {
      const double tolerance =
          4.0 * std::sqrt(var[i] / (static_cast<double>(draws) * batch)) +
          1e-12;
      EXPECT_LE(std::abs(mean[i] - full[i]), tolerance)
          << "seed " << seed << " coordinate " << i;
    }
  }
}

TEST(StochasticGradient, VarianceShrinksWithBatch) {
  const auto gen = testsupport::desk_problem(41, 1, 16, 4, 2);
  const auto& term = gen.problem.smooth_term(0);
  Vec x(4);
  x << 0.4, -0.1, 0.0, 0.2;
  const Vec full = term.gradient(x);

  const auto empirical_variance = [&](int batch, std::uint64_t salt) {
    const int draws = 10000;
    double acc = 0.0;
    for (int t = 0; t < draws; ++t)
      acc += (stochastic_gradient(
                  term, x, StreamKey{salt, 0, static_cast<std::uint64_t>(t)},
                  batch) -
              full)
                 .squaredNorm();
    return acc / draws;
  };

  const double v1 = empirical_variance(1, 7001);
  const double v16 = empirical_variance(16, 7002);
  EXPECT_NEAR(v16 / v1, 1.0 / 16.0, 0.3 / 16.0);
}

// ---------------------------------------------------------------------------

TEST(Prox, L1BoxKnownValues) {
  Vec v(1);
  v << 0.0;
  EXPECT_EQ(prox_l1_box(v, 12.0, 0.01, -1.0, 1.0)[0], 0.0);

  v << 5.0;  // soft threshold to 4.999166..., clamp to the box edge
  EXPECT_DOUBLE_EQ(prox_l1_box(v, 12.0, 0.01, -1.0, 1.0)[0], 1.0);

  v << 0.5;
  const double got = prox_l1_box(v, 12.0, 0.01, -1.0, 1.0)[0];
  EXPECT_NEAR(got, 0.5 - 0.01 / 12.0, 1e-15);
  const double grid = testsupport::grid_prox_scalar(0.5, 12.0, 0.01, -1.0, 1.0);
  EXPECT_NEAR(got, grid, 2e-6);
}

TEST(Prox, MatchesBruteForceGridOnRandomScalars) {
  Prng rng(51, 0x7067ULL);
  for (int trial = 0; trial < 25; ++trial) {
    const double v = rng.uniform(-2.0, 2.0);
    const double w = rng.uniform(0.3, 15.0);
    const double l1 = rng.uniform(0.0, 1.0);
    const L1BoxRegularizer reg(l1, -1.0, 1.0);
    Vec vv(1);
    vv << v;
    const double got = reg.prox(vv, w)[0];
    const double want = testsupport::grid_prox_scalar(v, w, l1, -1.0, 1.0);
    EXPECT_NEAR(got, want, 2e-6) << "trial " << trial;
  }
}

TEST(Prox, NonExpansiveOnRandomPairs) {
  Prng rng(52, 0x6e65ULL);
  const L1BoxRegularizer reg(0.2, -1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vec a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = rng.uniform(-3.0, 3.0);
      b[i] = rng.uniform(-3.0, 3.0);
    }
    const double w = rng.uniform(0.5, 10.0);
    EXPECT_LE((reg.prox(a, w) - reg.prox(b, w)).norm(),
              (a - b).norm() + 1e-12);
  }
}

TEST(Prox, IdentityWhenRegularizerIsZero) {
  const ZeroRegularizer reg;
  Vec v(4);
  v << 1.0, -2.0, 0.5, 8.0;
  EXPECT_EQ(reg.prox(v, 3.0), v);
}

TEST(Prox, RejectsBadWeight) {
  const L1BoxRegularizer reg(0.1, -1.0, 1.0);
  Vec v(1);
  v << 0.5;
  EXPECT_THROW(reg.prox(v, 0.0), BadParameters);
}

// ---------------------------------------------------------------------------

TEST(Epigraph, ScalarAbsoluteValueWitness) {
  const double weight = 0.3;
  const L1BoxRegularizer reg = L1BoxRegularizer::l1_only(weight);
  const EpigraphWitness w = epigraph_witness(reg, 1);
  ASSERT_EQ(w.coeff_x.rows(), 2);
  // rows encode -w*s*x + y >= 0 for s in {+1, -1}
  EXPECT_DOUBLE_EQ(w.coeff_x(0, 0), -weight);
  EXPECT_DOUBLE_EQ(w.coeff_x(1, 0), weight);
  EXPECT_DOUBLE_EQ(w.coeff_y[0], 1.0);
  EXPECT_DOUBLE_EQ(w.coeff_y[1], 1.0);
  EXPECT_EQ(w.offset[0], 0.0);
  EXPECT_EQ(w.offset[1], 0.0);
}

TEST(Epigraph, ZeroRegularizerWitness) {
  const ZeroRegularizer reg;
  const EpigraphWitness w = epigraph_witness(reg, 2);
  ASSERT_EQ(w.coeff_x.rows(), 1);
  EXPECT_EQ(w.coeff_x.row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(w.coeff_y[0], 1.0);
  EXPECT_EQ(w.offset[0], 0.0);
}

TEST(Epigraph, MembershipMatchesDirectEvaluation) {
  const L1BoxRegularizer reg(0.25, -1.0, 1.0);
  const int n = 3;
  const EpigraphWitness w = epigraph_witness(reg, n);
  Prng rng(61, 0x6d62ULL);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(-1.5, 1.5);
    const double y = rng.uniform(-0.5, 1.5);
    const Vec lhs = w.coeff_x * x + w.coeff_y * y;
    bool member = true;
    for (Eigen::Index r = 0; r < lhs.size(); ++r)
      if (lhs[r] < w.offset[r]) member = false;
    const bool direct = reg.value(x) <= y + 1e-12;
    EXPECT_EQ(member, direct) << "trial " << trial;
  }
}

TEST(Epigraph, UnsupportedRegularizerRejected) {
  struct Weird final : NonsmoothTerm {
    double value(const Vec& x) const override { return x.squaredNorm(); }
    Vec prox(const Vec& v, double w) const override { return v / (1.0 + 1.0 / w); }
  } weird;
  EXPECT_THROW(epigraph_witness(weird, 2), NotPolyhedral);
}

// ---------------------------------------------------------------------------

TEST(Regression, GenerationIsDeterministic) {
  RegressionSpec spec;
  spec.agents = 4;
  spec.samples_per_agent = 6;
  spec.dim = 10;
  spec.sparsity = 3;
  const auto a = generate_regression(321, spec);
  const auto b = generate_regression(321, spec);
  ASSERT_EQ(a.dataset.features.size(), b.dataset.features.size());
  for (std::size_t i = 0; i < a.dataset.features.size(); ++i) {
    EXPECT_EQ(a.dataset.features[i], b.dataset.features[i]);
    EXPECT_EQ(a.dataset.responses[i], b.dataset.responses[i]);
  }
  EXPECT_EQ(a.dataset.ground_truth, b.dataset.ground_truth);
}

TEST(Regression, GroundTruthSparsityAndModelConsistency) {
  RegressionSpec spec;
  spec.agents = 3;
  spec.samples_per_agent = 50;
  spec.dim = 12;
  spec.sparsity = 4;
  spec.noise_sd = 2.0;
  const auto gen = generate_regression(99, spec);
  int nonzeros = 0;
  for (int i = 0; i < spec.dim; ++i) {
    if (gen.dataset.ground_truth[i] != 0.0) {
      ++nonzeros;
      EXPECT_LE(std::abs(gen.dataset.ground_truth[i]), 1.0);
    }
  }
  EXPECT_EQ(nonzeros, spec.sparsity);

  // y - H x* is exactly the drawn noise; its scale should look like noise_sd
  double acc = 0.0;
  int count = 0;
  for (int a = 0; a < spec.agents; ++a) {
    const Vec res = gen.dataset.responses[a] -
                    gen.dataset.features[a] * gen.dataset.ground_truth;
    acc += res.squaredNorm();
    count += static_cast<int>(res.size());
  }
  const double sd = std::sqrt(acc / count);
  EXPECT_NEAR(sd, spec.noise_sd, 0.5);
}

TEST(Regression, RejectsBadSizes) {
  RegressionSpec spec;
  spec.sparsity = spec.dim + 1;
  EXPECT_THROW(generate_regression(1, spec), BadSizes);
}

TEST(Regression, DeskAndReferenceScaleConfigsBuild) {
  // reference scale: 20 agents, 150 samples, dim 256, 16-sparse
  RegressionSpec paper;
  paper.agents = 20;
  paper.samples_per_agent = 150;
  paper.dim = 256;
  paper.sparsity = 16;
  const auto big = generate_regression(5, paper);
  EXPECT_EQ(big.problem.agents(), 20);
  EXPECT_EQ(big.dataset.features[0].rows(), 150);
  EXPECT_EQ(big.dataset.features[0].cols(), 256);

  const auto desk = testsupport::desk_problem(5);
  EXPECT_EQ(desk.problem.agents(), 5);
  EXPECT_EQ(desk.problem.dim, 32);
}
