#pragma once

// Experiment drivers behind the `ngc` command-line tool. Time grids are on
// the t - gamma axis: a grid point x is evaluated at absolute time x + gamma
// and written back as x.

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ngc/descent.hpp"
#include "ngc/latency.hpp"
#include "ngc/simulator.hpp"

namespace ngc {

struct ExperimentConfig {
  std::vector<Scheme> schemes{Scheme::uncoded(), Scheme::gc(1), Scheme::gc(2), Scheme::gc(4),
                              Scheme::gc(6),     Scheme::ngc(2), Scheme::ngc(4), Scheme::ngc(6)};
  ClusterParams cluster;
  double t_min = 2.0;
  double t_max = 18.0;
  int steps = 100;
  long trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double termination_delay = 0.0;

  void validate() const {
    cluster.validate();
    if (schemes.empty()) throw InvalidArgument("no schemes selected");
    for (const auto& s : schemes)
      if (s.tolerance < 0 || s.tolerance > cluster.n - 1)
        throw InvalidArgument("scheme " + s.label() + " needs tolerance in [0, n-1]");
    if (!(t_min < t_max)) throw InvalidArgument("t_min must be below t_max");
    if (steps < 2) throw InvalidArgument("steps must be >= 2");
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    if (!(termination_delay >= 0.0)) throw InvalidArgument("termination delay must be >= 0");
  }

  /// Grid on the plotted t - gamma axis.
  std::vector<double> plot_grid() const { return linear_grid(t_min, t_max, steps); }

  std::vector<double> absolute_grid() const {
    auto g = plot_grid();
    for (auto& t : g) t += cluster.gamma;
    return g;
  }
};

namespace detail {

inline LatencyCurve relabel_axis(LatencyCurve curve, const std::vector<double>& plot_grid) {
  curve.grid = plot_grid;
  return curve;
}

inline std::ostream& csv_number(std::ostream& os, double v) {
  return os << std::defaultfloat << std::setprecision(12) << v;
}

}  // namespace detail

inline std::vector<LatencyCurve> analyze(const ExperimentConfig& config) {
  config.validate();
  const auto plot = config.plot_grid();
  const auto grid = config.absolute_grid();
  std::vector<LatencyCurve> curves;
  for (const auto& s : config.schemes) curves.push_back(detail::relabel_axis(latency_curve(s, grid, config.cluster), plot));
  return curves;
}

struct SimulationReport {
  std::vector<LatencyCurve> curves;
  std::vector<std::pair<std::string, LoadStats>> loads;
};

inline SimulationReport simulate(const ExperimentConfig& config) {
  config.validate();
  const auto plot = config.plot_grid();
  const auto grid = config.absolute_grid();
  SimulationReport report;
  for (std::size_t i = 0; i < config.schemes.size(); ++i) {
    const auto& s = config.schemes[i];
    // Each scheme gets its own stream so adding a scheme leaves the others unchanged.
    const auto seed = derive_seed(config.seed, static_cast<std::uint64_t>(s.kind) * 1000 + static_cast<std::uint64_t>(s.tolerance));
    auto result = run_experiment(s, config.trials, seed, config.cluster, grid,
                                 RunOptions{config.threads, config.termination_delay});
    report.curves.push_back(detail::relabel_axis(std::move(result.curve), plot));
    report.loads.emplace_back(s.label(), result.load);
  }
  return report;
}

inline void write_curves_csv(std::ostream& os, const std::vector<LatencyCurve>& curves) {
  os << "scheme,t,prob\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      os << c.label << ',';
      detail::csv_number(os, c.grid[i]) << ',';
      detail::csv_number(os, c.values[i]) << '\n';
    }
}

inline void write_load_csv(std::ostream& os, const SimulationReport& report) {
  os << "scheme,mean_load,p95_load,undecodable_rate\n";
  for (const auto& [label, load] : report.loads) {
    os << label << ',';
    detail::csv_number(os, load.mean_load) << ',';
    detail::csv_number(os, load.p95_load) << ',';
    detail::csv_number(os, load.undecodable_rate) << '\n';
  }
}

struct DescentDemoConfig {
  int m = 64;
  int c = 8;
  double noise = 0.1;
  int iterations = 200;
  double eta = 0.5;
  int s_max = 3;
  ClusterParams cluster;
  std::uint64_t seed = 1;
};

struct DescentDemoResult {
  DescentResult run;
  double optimum_loss = 0.0;
  double max_recovery_error = 0.0;
};

inline DescentDemoResult gd_demo(const DescentDemoConfig& config) {
  config.cluster.validate();
  const auto data = make_synthetic_dataset(config.m, config.c, config.noise, derive_seed(config.seed, 1));
  const auto code = build_ngc(config.cluster.n, config.s_max, derive_seed(config.seed, 2));
  DescentDemoResult out;
  out.run = run_descent(data, code, config.iterations, config.eta, config.cluster, derive_seed(config.seed, 3));
  const Vector best = data.features.colPivHouseholderQr().solve(data.labels);
  out.optimum_loss = (data.labels - data.features * best).squaredNorm() / (2.0 * config.m);
  for (const auto& r : out.run.records) out.max_recovery_error = std::max(out.max_recovery_error, r.recovery_error);
  return out;
}

inline void write_descent_csv(std::ostream& os, const DescentResult& run) {
  os << "iter,loss,recovery_error,decoded_sigma,latency\n";
  for (const auto& r : run.records) {
    os << r.iteration << ',';
    detail::csv_number(os, r.loss) << ',';
    detail::csv_number(os, r.recovery_error) << ',' << r.decoded_sigma << ',';
    detail::csv_number(os, r.latency) << '\n';
  }
}

}  // namespace ngc
