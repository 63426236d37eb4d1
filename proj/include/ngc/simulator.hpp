#pragma once

// Monte Carlo model of one gradient-descent iteration on a straggling cluster.
// The main node sees every worker's progress instantly; it stops the round as
// soon as some component code becomes decodable. Tasks still in flight at
// that moment are abandoned and do not count toward the worker's load.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "ngc/errors.hpp"
#include "ngc/latency.hpp"
#include "ngc/rng.hpp"

namespace ngc {

struct WorkerTrace {
  bool failed = false;
  /// finish_times[u-1] = T^(u), the time at which task u completes.
  std::vector<double> finish_times;
};

struct IterationOutcome {
  std::optional<double> latency;
  std::optional<int> decoded_sigma;
  std::vector<int> tasks_done;
  int kappa = 0;

  bool decoded() const noexcept { return latency.has_value(); }
};

inline WorkerTrace sample_worker_trace(Engine& rng, const ClusterParams& p, int u_max) {
  if (u_max < 1) throw InvalidArgument("u_max must be >= 1");
  WorkerTrace trace;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  trace.failed = uniform(rng) < p.p_e;
  if (trace.failed) return trace;
  std::exponential_distribution<double> service(p.lambda);
  trace.finish_times.resize(static_cast<std::size_t>(u_max));
  double stochastic = 0.0;
  for (int u = 1; u <= u_max; ++u) {
    stochastic += service(rng);
    trace.finish_times[static_cast<std::size_t>(u) - 1] = p.gamma + p.eps + u * p.rho + stochastic;
  }
  return trace;
}

inline std::vector<WorkerTrace> sample_cluster(Engine& rng, const ClusterParams& p, int u_max) {
  std::vector<WorkerTrace> traces;
  traces.reserve(static_cast<std::size_t>(p.n));
  for (int i = 0; i < p.n; ++i) traces.push_back(sample_worker_trace(rng, p, u_max));
  return traces;
}

namespace detail {

inline int count_failed(std::span<const WorkerTrace> traces) {
  return static_cast<int>(std::count_if(traces.begin(), traces.end(), [](const auto& w) { return w.failed; }));
}

/// r-th smallest (1-based) T^(u) over non-failing workers, or +inf if fewer
/// than r of them exist.
inline double order_statistic(std::span<const WorkerTrace> traces, int u, int r) {
  std::vector<double> times;
  times.reserve(traces.size());
  for (const auto& w : traces) {
    if (w.failed) continue;
    if (static_cast<int>(w.finish_times.size()) < u) throw InvalidArgument("trace shorter than requested layer");
    times.push_back(w.finish_times[static_cast<std::size_t>(u) - 1]);
  }
  if (static_cast<int>(times.size()) < r) return std::numeric_limits<double>::infinity();
  std::nth_element(times.begin(), times.begin() + (r - 1), times.end());
  return times[static_cast<std::size_t>(r) - 1];
}

inline std::vector<int> completed_tasks(std::span<const WorkerTrace> traces, double stop, int cap) {
  std::vector<int> done(traces.size(), 0);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].failed) continue;
    const auto& ft = traces[i].finish_times;
    const auto limit = std::min<std::size_t>(ft.size(), static_cast<std::size_t>(cap));
    done[i] = static_cast<int>(std::upper_bound(ft.begin(), ft.begin() + static_cast<std::ptrdiff_t>(limit), stop) - ft.begin());
  }
  return done;
}

}  // namespace detail

/// Nested-code decode rule on fixed traces: the round ends at the earliest u in
/// 1..s_max+1 such that n - u + 1 workers finished u tasks, and component
/// sigma = u - 1 is used (ties go to the smaller sigma). `termination_delay`
/// is added to the latency for the final stop signal, if modelled.
inline IterationOutcome evaluate_ngc(std::span<const WorkerTrace> traces, int s_max, double termination_delay = 0.0) {
  const int n = static_cast<int>(traces.size());
  if (s_max < 0 || s_max > n - 1) throw InvalidArgument("s_max must lie in [0, n-1]");
  IterationOutcome out;
  out.kappa = detail::count_failed(traces);
  const int layers = s_max + 1;
  if (out.kappa > s_max) {
    // Nobody stops the round: surviving workers run through every layer.
    out.tasks_done = detail::completed_tasks(traces, std::numeric_limits<double>::infinity(), layers);
    return out;
  }
  double best = std::numeric_limits<double>::infinity();
  int best_u = 0;
  for (int u = 1; u <= layers; ++u) {
    const double t = detail::order_statistic(traces, u, n - u + 1);
    if (t < best) {
      best = t;
      best_u = u;
    }
  }
  out.latency = best + termination_delay;
  out.decoded_sigma = best_u - 1;
  out.tasks_done = detail::completed_tasks(traces, best, layers);
  return out;
}

/// Fixed-tolerance code on fixed traces: latency is the (n - sigma)-th order
/// statistic of T^(sigma+1) over the non-failing workers.
inline IterationOutcome evaluate_gc(std::span<const WorkerTrace> traces, int sigma) {
  const int n = static_cast<int>(traces.size());
  if (sigma < 0 || sigma > n - 1) throw InvalidArgument("sigma must lie in [0, n-1]");
  IterationOutcome out;
  out.kappa = detail::count_failed(traces);
  if (out.kappa > sigma) {
    out.tasks_done = detail::completed_tasks(traces, std::numeric_limits<double>::infinity(), sigma + 1);
    return out;
  }
  const double t = detail::order_statistic(traces, sigma + 1, n - sigma);
  out.latency = t;
  out.decoded_sigma = sigma;
  out.tasks_done = detail::completed_tasks(traces, t, sigma + 1);
  return out;
}

inline IterationOutcome simulate_ngc_iteration(Engine& rng, int s_max, const ClusterParams& p,
                                               double termination_delay = 0.0) {
  p.validate();
  if (s_max < 0 || s_max > p.n - 1) throw InvalidArgument("s_max must lie in [0, n-1]");
  const auto traces = sample_cluster(rng, p, s_max + 1);
  return evaluate_ngc(traces, s_max, termination_delay);
}

inline IterationOutcome simulate_gc_iteration(Engine& rng, int sigma, const ClusterParams& p) {
  p.validate();
  if (sigma < 0 || sigma > p.n - 1) throw InvalidArgument("sigma must lie in [0, n-1]");
  const auto traces = sample_cluster(rng, p, sigma + 1);
  return evaluate_gc(traces, sigma);
}

inline IterationOutcome simulate_iteration(Engine& rng, const Scheme& scheme, const ClusterParams& p,
                                           double termination_delay = 0.0) {
  switch (scheme.kind) {
    case Scheme::Kind::Uncoded: return simulate_gc_iteration(rng, 0, p);
    case Scheme::Kind::GC: return simulate_gc_iteration(rng, scheme.tolerance, p);
    case Scheme::Kind::NGC: return simulate_ngc_iteration(rng, scheme.tolerance, p, termination_delay);
  }
  throw InvalidArgument("unknown scheme");
}

/// Per-worker load: completed tasks at termination, averaged over the n
/// workers of a trial. Mean and 95th percentile (nearest rank) are over trials.
struct LoadStats {
  double mean_load = 0.0;
  double p95_load = 0.0;
  double undecodable_rate = 0.0;
};

struct ExperimentResult {
  LatencyCurve curve;
  LoadStats load;
  /// Per-trial latency; +inf marks an undecodable trial.
  std::vector<double> latencies;
};

struct RunOptions {
  unsigned threads = 1;
  double termination_delay = 0.0;
};

/// Fraction of samples <= t at each grid point; +inf samples never count.
inline LatencyCurve empirical_curve(std::vector<double> samples, std::span<const double> grid, std::string label) {
  require_increasing(grid);
  std::sort(samples.begin(), samples.end());
  LatencyCurve curve{{grid.begin(), grid.end()}, {}, std::move(label)};
  curve.values.reserve(grid.size());
  const double total = static_cast<double>(samples.size());
  for (double t : grid) {
    const auto hits = std::upper_bound(samples.begin(), samples.end(), t) - samples.begin();
    curve.values.push_back(total > 0 ? static_cast<double>(hits) / total : 0.0);
  }
  return curve;
}

/// Trial i draws from its own engine seeded with seed ^ i, so the result does
/// not depend on how trials are spread over threads.
inline ExperimentResult run_experiment(const Scheme& scheme, long trials, std::uint64_t seed, const ClusterParams& p,
                                       std::span<const double> grid, const RunOptions& options = {}) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  p.validate();
  require_increasing(grid);
  if (scheme.tolerance < 0 || scheme.tolerance > p.n - 1) throw InvalidArgument("scheme tolerance out of range");

  std::vector<double> latencies(static_cast<std::size_t>(trials));
  std::vector<double> loads(static_cast<std::size_t>(trials));
  auto run_range = [&](long begin, long end) {
    for (long i = begin; i < end; ++i) {
      Engine rng = make_engine(seed ^ static_cast<std::uint64_t>(i));
      const auto out = simulate_iteration(rng, scheme, p, options.termination_delay);
      latencies[static_cast<std::size_t>(i)] = out.latency.value_or(std::numeric_limits<double>::infinity());
      double sum = 0.0;
      for (int d : out.tasks_done) sum += d;
      loads[static_cast<std::size_t>(i)] = sum / static_cast<double>(p.n);
    }
  };
  const long workers = std::clamp<long>(static_cast<long>(options.threads), 1, trials);
  if (workers == 1) {
    run_range(0, trials);
  } else {
    std::vector<std::jthread> pool;
    const long chunk = (trials + workers - 1) / workers;
    for (long w = 0; w < workers; ++w) {
      const long begin = w * chunk;
      const long end = std::min(trials, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
  }

  ExperimentResult result;
  const auto undecodable = std::count_if(latencies.begin(), latencies.end(), [](double t) { return std::isinf(t); });
  result.load.undecodable_rate = static_cast<double>(undecodable) / static_cast<double>(trials);
  double load_sum = 0.0;
  for (double l : loads) load_sum += l;
  result.load.mean_load = load_sum / static_cast<double>(trials);
  std::vector<double> sorted_loads = loads;
  std::sort(sorted_loads.begin(), sorted_loads.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(trials)));
  result.load.p95_load = sorted_loads[std::max<std::size_t>(rank, 1) - 1];
  result.curve = empirical_curve(latencies, grid, scheme.label());
  result.latencies = std::move(latencies);
  return result;
}

}  // namespace ngc
