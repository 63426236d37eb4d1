#pragma once

// Coded distributed gradient descent for linear least squares,
// L(theta) = 1/(2m) * ||y - D theta||^2, on top of a nested gradient code and
// the simulated cluster. Each iteration recovers the exact full gradient from
// the responses of the workers that reached the decoded layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "ngc/codes.hpp"
#include "ngc/errors.hpp"
#include "ngc/rng.hpp"
#include "ngc/simulator.hpp"

namespace ngc {

struct Dataset {
  Matrix features;  // m x c
  Vector labels;    // m

  Eigen::Index rows() const noexcept { return features.rows(); }
  Eigen::Index cols() const noexcept { return features.cols(); }
};

/// Equal-size contiguous row blocks; `rows` is the unpadded sample count m.
struct PartitionedDataset {
  std::vector<Dataset> blocks;
  Eigen::Index rows = 0;
};

inline Dataset make_synthetic_dataset(int m, int c, double noise, std::uint64_t seed) {
  if (m < 1 || c < 1) throw InvalidArgument("dataset needs m >= 1 and c >= 1");
  if (!(noise >= 0.0)) throw InvalidArgument("noise level must be >= 0");
  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data{Matrix(m, c), Vector(m)};
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < c; ++j) data.features(r, j) = normal(rng);
  Vector truth(c);
  for (int j = 0; j < c; ++j) truth(j) = normal(rng);
  data.labels = data.features * truth;
  for (int r = 0; r < m; ++r) data.labels(r) += noise * normal(rng);
  return data;
}

/// Splits into n blocks, zero-padding the tail so every block has ceil(m/n) rows.
inline PartitionedDataset partition(const Dataset& data, int n) {
  if (n < 1) throw InvalidArgument("need at least one block");
  if (data.labels.size() != data.rows()) throw InvalidArgument("label count does not match data rows");
  const Eigen::Index m = data.rows();
  const Eigen::Index per_block = (m + n - 1) / n;
  PartitionedDataset out;
  out.rows = m;
  out.blocks.reserve(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    Dataset block{Matrix::Zero(per_block, data.cols()), Vector::Zero(per_block)};
    const Eigen::Index begin = b * per_block;
    const Eigen::Index take = std::clamp<Eigen::Index>(m - begin, 0, per_block);
    if (take > 0) {
      block.features.topRows(take) = data.features.middleRows(begin, take);
      block.labels.head(take) = data.labels.segment(begin, take);
    }
    out.blocks.push_back(std::move(block));
  }
  return out;
}

/// sum over rows of the block of -(y_j - d_j^T theta) d_j.
inline Vector partial_gradient(const Dataset& block, const Vector& theta) {
  if (theta.size() != block.cols()) throw InvalidArgument("theta has the wrong dimension");
  return -block.features.transpose() * (block.labels - block.features * theta);
}

inline Vector full_gradient(const PartitionedDataset& data, const Vector& theta) {
  Vector g = Vector::Zero(theta.size());
  for (const auto& b : data.blocks) g += partial_gradient(b, theta);
  return g;
}

inline double loss(const PartitionedDataset& data, const Vector& theta) {
  double sq = 0.0;
  for (const auto& b : data.blocks) sq += (b.labels - b.features * theta).squaredNorm();
  return sq / (2.0 * static_cast<double>(data.rows));
}

struct DescentState {
  Vector theta;
  double eta = 0.1;
  int iteration = 0;
};

struct RecoveryReport {
  int decoded_sigma = 0;
  std::vector<int> responders;
  /// ||decoded - sum_i g_i||_inf / max_i ||g_i||_inf (absolute when every g_i is 0).
  /// The sum itself vanishes at the optimum, so it is not used as the scale.
  double recovery_error = 0.0;
  double latency = 0.0;
};

/// One step theta <- theta - (eta/m) * g, with g decoded from the workers that
/// finished layer decoded_sigma + 1 of `outcome`. Each such worker returns
/// b_i * G built only from the tasks it computed.
inline std::pair<DescentState, RecoveryReport> coded_iteration(const DescentState& state, const PartitionedDataset& data,
                                                               const NestedGradientCode& code,
                                                               const IterationOutcome& outcome,
                                                               double decode_tol = kDefaultDecodeTolerance) {
  if (!outcome.decoded_sigma || !outcome.latency) throw UndecodableIteration("outcome has no decodable layer");
  const int n = code.n();
  const int sigma = *outcome.decoded_sigma;
  if (static_cast<int>(data.blocks.size()) != n || static_cast<int>(outcome.tasks_done.size()) != n)
    throw InvalidArgument("code, data and cluster disagree on n");
  if (sigma > code.s_max()) throw InvalidArgument("decoded layer exceeds the code's s_max");

  const auto& b = code.component(sigma);
  std::vector<Vector> gradients(static_cast<std::size_t>(n));
  std::vector<bool> computed(static_cast<std::size_t>(n), false);
  std::vector<std::optional<Vector>> responses(static_cast<std::size_t>(n));
  RecoveryReport report;
  report.decoded_sigma = sigma;
  report.latency = *outcome.latency;
  for (int i = 0; i < n; ++i) {
    if (outcome.tasks_done[static_cast<std::size_t>(i)] < sigma + 1) continue;
    report.responders.push_back(i);
    std::vector<std::optional<Vector>> local(static_cast<std::size_t>(n));
    for (int task : cyclic_support(n, sigma, i)) {
      const auto slot = static_cast<std::size_t>(task);
      if (!computed[slot]) {
        gradients[slot] = partial_gradient(data.blocks[slot], state.theta);
        computed[slot] = true;
      }
      local[slot] = gradients[slot];
    }
    responses[static_cast<std::size_t>(i)] = encode_response(b.entries().row(i), local);
  }

  const DecodingRow row = decode_row(b, report.responders, decode_tol);
  const Vector decoded = decode_sum(row, responses);
  Vector direct = Vector::Zero(state.theta.size());
  double scale = 0.0;
  for (const auto& block : data.blocks) {
    const Vector g = partial_gradient(block, state.theta);
    scale = std::max(scale, g.lpNorm<Eigen::Infinity>());
    direct += g;
  }
  const double gap = (decoded - direct).lpNorm<Eigen::Infinity>();
  report.recovery_error = scale > 0.0 ? gap / scale : gap;

  DescentState next{state.theta - (state.eta / static_cast<double>(data.rows)) * decoded, state.eta,
                    state.iteration + 1};
  return {std::move(next), std::move(report)};
}

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double recovery_error = 0.0;
  int decoded_sigma = 0;
  double latency = 0.0;
  /// Cluster rounds redrawn because more than s_max workers failed.
  int resamples = 0;
};

struct DescentResult {
  Vector initial_theta;
  Vector theta;
  std::vector<IterationRecord> records;
};

inline constexpr int kMaxResamples = 10000;

inline Vector initial_parameters(Eigen::Index dim, std::uint64_t seed) {
  Engine rng = make_engine(derive_seed(seed, ~0ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector theta(dim);
  for (Eigen::Index j = 0; j < dim; ++j) theta(j) = normal(rng);
  return theta;
}

inline DescentResult run_descent(const Dataset& dataset, const NestedGradientCode& code, int iterations, double eta,
                                 const ClusterParams& cluster, std::uint64_t seed) {
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  cluster.validate();
  if (cluster.n != code.n()) throw InvalidArgument("cluster size does not match the code");

  const auto data = partition(dataset, code.n());
  DescentResult result;
  result.initial_theta = initial_parameters(dataset.cols(), seed);
  DescentState state{result.initial_theta, eta, 0};
  for (int t = 0; t < iterations; ++t) {
    const auto round_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    IterationOutcome outcome;
    int resamples = 0;
    for (;; ++resamples) {
      if (resamples > kMaxResamples) throw UndecodableIteration("no decodable round after repeated resampling");
      Engine rng = make_engine(derive_seed(round_seed, static_cast<std::uint64_t>(resamples)));
      outcome = simulate_ngc_iteration(rng, code.s_max(), cluster);
      if (outcome.decoded()) break;
    }
    auto [next, report] = coded_iteration(state, data, code, outcome);
    state = std::move(next);
    result.records.push_back(
        {state.iteration, loss(data, state.theta), report.recovery_error, report.decoded_sigma, report.latency, resamples});
  }
  result.theta = state.theta;
  return result;
}

/// Plain full-gradient descent from the same starting point, for comparison.
inline std::vector<double> run_uncoded_descent(const Dataset& dataset, int n, const Vector& theta0, int iterations,
                                               double eta, Vector* final_theta = nullptr) {
  const auto data = partition(dataset, n);
  Vector theta = theta0;
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(iterations));
  for (int t = 0; t < iterations; ++t) {
    theta -= (eta / static_cast<double>(data.rows)) * full_gradient(data, theta);
    losses.push_back(loss(data, theta));
  }
  if (final_theta) *final_theta = theta;
  return losses;
}

}  // namespace ngc
