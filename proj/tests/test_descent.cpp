#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ngc/descent.hpp"

namespace {

using ngc::Matrix;
using ngc::Vector;

double block_loss(const ngc::Dataset& b, const Vector& theta) {
  return 0.5 * (b.labels - b.features * theta).squaredNorm();
}

// Closed-form least-squares optimum through the normal equations.
double optimum_loss(const ngc::Dataset& d) {
  const Matrix gram = d.features.transpose() * d.features;
  const Vector best = gram.ldlt().solve(d.features.transpose() * d.labels);
  return (d.labels - d.features * best).squaredNorm() / (2.0 * static_cast<double>(d.rows()));
}

ngc::IterationOutcome outcome_with(int n, int sigma, const std::vector<int>& responders) {
  ngc::IterationOutcome out;
  out.latency = 1.0;
  out.decoded_sigma = sigma;
  out.tasks_done.assign(static_cast<std::size_t>(n), sigma);
  for (int i : responders) out.tasks_done[static_cast<std::size_t>(i)] = sigma + 1;
  return out;
}

}  // namespace

TEST(Partition, OneRowPerBlock) {
  const auto d = ngc::make_synthetic_dataset(8, 3, 0.1, 1);
  const auto p = ngc::partition(d, 8);
  ASSERT_EQ(p.blocks.size(), 8u);
  for (const auto& b : p.blocks) EXPECT_EQ(b.rows(), 1);
}

TEST(Partition, ZeroPadsToMultipleOfBlockCount) {
  const auto d = ngc::make_synthetic_dataset(10, 3, 0.1, 2);
  const auto p = ngc::partition(d, 8);
  ASSERT_EQ(p.blocks.size(), 8u);
  Eigen::Index total = 0;
  for (const auto& b : p.blocks) {
    EXPECT_EQ(b.rows(), 2);
    total += b.rows();
  }
  EXPECT_EQ(total, 16);
  EXPECT_EQ(p.rows, 10);
  EXPECT_TRUE(p.blocks[5].features.isZero());
  EXPECT_TRUE(p.blocks[7].labels.isZero());
}

TEST(Partition, ReassemblesOriginalRows) {
  const auto d = ngc::make_synthetic_dataset(37, 4, 0.3, 3);
  const auto p = ngc::partition(d, 6);
  Eigen::Index row = 0;
  for (const auto& b : p.blocks)
    for (Eigen::Index r = 0; r < b.rows() && row < d.rows(); ++r, ++row) {
      EXPECT_EQ(b.features.row(r), d.features.row(row));
      EXPECT_EQ(b.labels(r), d.labels(row));
    }
  EXPECT_EQ(row, d.rows());
}

TEST(PartialGradient, ClosedForm) {
  ngc::Dataset one{Matrix(1, 2), Vector(1)};
  one.features << 1.0, 0.0;
  one.labels << 1.0;
  const Vector g = ngc::partial_gradient(one, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(g(0), -1.0);
  EXPECT_DOUBLE_EQ(g(1), 0.0);
}

TEST(PartialGradient, VanishesAtLeastSquaresSolution) {
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.5, 4);
  const Vector best = d.features.colPivHouseholderQr().solve(d.labels);
  const auto p = ngc::partition(d, 8);
  EXPECT_LE(ngc::full_gradient(p, best).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(PartialGradient, MatchesFiniteDifferences) {
  const auto d = ngc::make_synthetic_dataset(24, 5, 0.2, 5);
  const auto p = ngc::partition(d, 4);
  const Vector theta = ngc::initial_parameters(5, 17);
  const double h = 1e-5;
  for (const auto& b : p.blocks) {
    const Vector g = ngc::partial_gradient(b, theta);
    for (int j = 0; j < 5; ++j) {
      Vector up = theta, down = theta;
      up(j) += h;
      down(j) -= h;
      const double fd = (block_loss(b, up) - block_loss(b, down)) / (2 * h);
      EXPECT_NEAR(g(j), fd, 1e-5);
    }
  }
}

TEST(CodedIteration, IdentityLayerIsPlainSum) {
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.1, 6);
  const auto p = ngc::partition(d, 8);
  const auto code = ngc::build_ngc(8, 3, 1);
  const ngc::DescentState state{ngc::initial_parameters(8, 2), 0.5, 0};
  const auto [next, report] = ngc::coded_iteration(state, p, code, outcome_with(8, 0, {0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_LT(report.recovery_error, 1e-12);
  EXPECT_EQ(report.decoded_sigma, 0);
  EXPECT_EQ(next.iteration, 1);
}

TEST(CodedIteration, EveryFiveOfEightResponderSetRecoversGradient) {
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.1, 7);
  const auto p = ngc::partition(d, 8);
  const auto code = ngc::build_ngc(8, 3, 9);
  const ngc::DescentState state{ngc::initial_parameters(8, 3), 0.5, 0};
  const Vector expected = state.theta - (0.5 / 64.0) * ngc::full_gradient(p, state.theta);
  std::vector<bool> pick(8, false);
  std::fill(pick.begin(), pick.begin() + 5, true);
  int sets = 0;
  do {
    std::vector<int> responders;
    for (int i = 0; i < 8; ++i)
      if (pick[static_cast<std::size_t>(i)]) responders.push_back(i);
    const auto [next, report] = ngc::coded_iteration(state, p, code, outcome_with(8, 3, responders));
    EXPECT_LT(report.recovery_error, 1e-8);
    EXPECT_EQ(report.responders, responders);
    EXPECT_LE((next.theta - expected).lpNorm<Eigen::Infinity>(), 1e-8);
    ++sets;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  EXPECT_EQ(sets, 56);
}

TEST(CodedIteration, UndecodableOutcomeThrows) {
  const auto d = ngc::make_synthetic_dataset(16, 2, 0.1, 8);
  const auto p = ngc::partition(d, 4);
  const auto code = ngc::build_ngc(4, 1, 1);
  ngc::IterationOutcome bad;
  bad.tasks_done.assign(4, 0);
  EXPECT_THROW(ngc::coded_iteration({Vector::Zero(2), 0.1, 0}, p, code, bad), ngc::UndecodableIteration);
}

TEST(RunDescent, TwoStragglerFreeStepsFollowPlainDescent) {
  auto cluster = ngc::ClusterParams{};
  cluster.p_e = 0.0;
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.1, 10);
  const auto code = ngc::build_ngc(8, 3, 4);
  const double eta = 0.1 * 64;  // eta / m = 0.1
  const auto run = ngc::run_descent(d, code, 2, eta, cluster, 12);
  Vector plain;
  ngc::run_uncoded_descent(d, 8, run.initial_theta, 2, eta, &plain);
  EXPECT_LE((run.theta - plain).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(RunDescent, ConvergesToLeastSquaresOptimum) {
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.1, 11);
  const auto code = ngc::build_ngc(8, 3, 5);
  const auto run = ngc::run_descent(d, code, 200, 0.5, ngc::ClusterParams{}, 13);
  ASSERT_EQ(run.records.size(), 200u);
  EXPECT_NEAR(run.records.back().loss, optimum_loss(d), 1e-6);
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    EXPECT_LT(run.records[i].recovery_error, 1e-8);
    if (i) {
      EXPECT_LE(run.records[i].loss, run.records[i - 1].loss * (1 + 1e-12));
    }
  }
}

TEST(RunDescent, CodedMatchesUncodedTrajectory) {
  const auto d = ngc::make_synthetic_dataset(64, 8, 0.1, 12);
  const auto code = ngc::build_ngc(8, 3, 6);
  const auto run = ngc::run_descent(d, code, 100, 0.5, ngc::ClusterParams{}, 14);
  Vector plain;
  const auto losses = ngc::run_uncoded_descent(d, 8, run.initial_theta, 100, 0.5, &plain);
  for (std::size_t i = 0; i < losses.size(); ++i)
    EXPECT_NEAR(run.records[i].loss, losses[i], 1e-8 * std::max(1.0, losses[i]));
  EXPECT_LE((run.theta - plain).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(RunDescent, DeterministicForSeed) {
  const auto d = ngc::make_synthetic_dataset(32, 4, 0.1, 13);
  const auto code = ngc::build_ngc(8, 2, 7);
  const auto a = ngc::run_descent(d, code, 30, 0.5, ngc::ClusterParams{}, 99);
  const auto b = ngc::run_descent(d, code, 30, 0.5, ngc::ClusterParams{}, 99);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(a.records[i].latency, b.records[i].latency);
    EXPECT_EQ(a.records[i].decoded_sigma, b.records[i].decoded_sigma);
  }
}

TEST(RunDescent, ResamplesRoundsWithTooManyFailures) {
  auto cluster = ngc::ClusterParams{};
  cluster.p_e = 0.4;  // kappa > s_max is common for s_max = 1
  const auto d = ngc::make_synthetic_dataset(16, 2, 0.1, 14);
  const auto code = ngc::build_ngc(8, 1, 8);
  const auto run = ngc::run_descent(d, code, 40, 0.5, cluster, 3);
  int resampled = 0;
  for (const auto& r : run.records) {
    resampled += r.resamples;
    EXPECT_LT(r.recovery_error, 1e-8);
    EXPECT_LE(r.decoded_sigma, 1);
  }
  EXPECT_GT(resampled, 0);
}
