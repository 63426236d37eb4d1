#pragma once

// Exact latency CDFs under the shifted-exponential worker model. A
// non-failing worker finishes its u-th task at
//
//   T^(u) = gamma + eps + u*rho + Erlang(u, lambda),
//
// and each worker fails for the whole iteration with probability p_e.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ngc/errors.hpp"

namespace ngc {

struct ClusterParams {
  double lambda = 0.5;
  double rho = 0.5;
  double gamma = 0.0;
  double eps = 0.1;
  double p_e = 0.05;
  int n = 8;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidParams("lambda must be positive and finite");
    if (!(rho >= 0.0) || !(gamma >= 0.0) || !(eps >= 0.0)) throw InvalidParams("rho, gamma, eps must be >= 0");
    if (!std::isfinite(rho) || !std::isfinite(gamma) || !std::isfinite(eps))
      throw InvalidParams("rho, gamma, eps must be finite");
    if (!(p_e >= 0.0 && p_e <= 1.0)) throw InvalidParams("p_e must lie in [0, 1]");
    if (n < 1) throw InvalidParams("n must be positive");
  }
};

/// A sampled CDF P(T <= t) on a strictly increasing grid.
struct LatencyCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::string label;
};

namespace detail {

inline double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

inline double log_binomial(int n, int k) { return log_factorial(n) - log_factorial(k) - log_factorial(n - k); }

inline double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

/// Poisson(mean) pmf at k, evaluated in log space.
inline double poisson_pmf(int k, double mean) {
  if (mean <= 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - log_factorial(k));
}

/// Calls visit(counts) for every layer-occupancy vector of the m = n - kappa
/// non-failing workers that leaves all component codes undecodable.
/// counts[u] is the number of workers that finished exactly u tasks
/// (u = 0..s_max+1), so that sum_{v >= u} counts[v] <= n - u for u >= 1.
inline void for_each_undecodable_occupancy(int n, int kappa, int s_max,
                                           const std::function<void(std::span<const int>)>& visit) {
  const int m = n - kappa;
  std::vector<int> counts(static_cast<std::size_t>(s_max) + 2, 0);
  // Fill from the top layer down; `above` = workers already placed in layers > u.
  std::function<void(int, int)> recurse = [&](int u, int above) {
    if (u == 0) {
      counts[0] = m - above;
      visit(counts);
      return;
    }
    const int limit = std::min(n - u, m) - above;
    for (int i = 0; i <= limit; ++i) {
      counts[static_cast<std::size_t>(u)] = i;
      recurse(u - 1, above + i);
    }
  };
  recurse(s_max + 1, 0);
}

inline double log_multinomial(int total, std::span<const int> counts) {
  double r = log_factorial(total);
  for (int c : counts) r -= log_factorial(c);
  return r;
}

/// base^exp with 0^0 = 1.
inline double power(double base, int exp) { return exp == 0 ? 1.0 : std::pow(base, exp); }

}  // namespace detail

/// P(T^(u) <= t): shifted Erlang(u, lambda) CDF with shift gamma + eps + u*rho.
inline double task_time_cdf(int u, double t, const ClusterParams& p) {
  if (u < 1) throw InvalidTaskCount("task count must be >= 1, got " + std::to_string(u));
  const double delta = t - (p.gamma + p.eps + u * p.rho);
  if (!(delta > 0.0)) return 0.0;
  if (std::isinf(delta)) return 1.0;
  const double mean = p.lambda * delta;
  // 1 - sum_{k<u} Poisson(k; mean), with the terms built by recurrence.
  double term = std::exp(-mean);
  double tail = term;
  for (int k = 1; k < u; ++k) {
    term *= mean / k;
    tail += term;
  }
  return detail::clamp_probability(1.0 - tail);
}

/// Binomial weight of exactly kappa failed workers out of n.
inline double failure_count_pmf(int kappa, int n, double p_e) {
  if (kappa < 0 || kappa > n) return 0.0;
  if (p_e <= 0.0) return kappa == 0 ? 1.0 : 0.0;
  if (p_e >= 1.0) return kappa == n ? 1.0 : 0.0;
  return std::exp(detail::log_binomial(n, kappa) + kappa * std::log(p_e) + (n - kappa) * std::log1p(-p_e));
}

/// P(T_GC <= t) for an (n, n, sigma) gradient code: at least n - sigma of the
/// non-failing workers must have finished all sigma + 1 tasks.
inline double gc_latency_cdf(double t, int sigma, const ClusterParams& p) {
  p.validate();
  if (sigma < 0 || sigma > p.n - 1) throw InvalidParams("sigma must lie in [0, n-1]");
  const double f = task_time_cdf(sigma + 1, t, p);
  double total = 0.0;
  for (int kappa = 0; kappa <= sigma; ++kappa) {
    const int alive = p.n - kappa;
    double conditional = 0.0;
    for (int tau = p.n - sigma; tau <= alive; ++tau)
      conditional += std::exp(detail::log_binomial(alive, tau)) * detail::power(f, tau) *
                     detail::power(1.0 - f, alive - tau);
    total += detail::clamp_probability(conditional) * failure_count_pmf(kappa, p.n, p.p_e);
  }
  return detail::clamp_probability(total);
}

/// P(T_NGC <= t | kappa failures) from per-layer occupancy probabilities
/// layer[u] = P(exactly u tasks finished by t), u = 0..s_max+1.
inline double ngc_conditional_from_layers(int n, int kappa, int s_max, std::span<const double> layer) {
  const int alive = n - kappa;
  double undecodable = 0.0;
  detail::for_each_undecodable_occupancy(n, kappa, s_max, [&](std::span<const int> counts) {
    double w = std::exp(detail::log_multinomial(alive, counts));
    for (std::size_t u = 0; u < counts.size(); ++u) w *= detail::power(layer[u], counts[u]);
    undecodable += w;
  });
  return detail::clamp_probability(1.0 - undecodable);
}

/// P(T_NGC <= t) for an (n, n, s_max) nested gradient code: the iteration ends
/// as soon as, for some u in 1..s_max+1, n - u + 1 workers finished u tasks.
inline double ngc_latency_cdf(double t, int s_max, const ClusterParams& p) {
  p.validate();
  if (s_max < 0 || s_max > p.n - 1) throw InvalidParams("s_max must lie in [0, n-1]");
  std::vector<double> cdf(static_cast<std::size_t>(s_max) + 2, 1.0);
  for (int u = 1; u <= s_max + 1; ++u) cdf[static_cast<std::size_t>(u)] = task_time_cdf(u, t, p);
  std::vector<double> layer(cdf.size());
  for (int u = 0; u <= s_max; ++u)
    layer[static_cast<std::size_t>(u)] = std::max(0.0, cdf[static_cast<std::size_t>(u)] - cdf[static_cast<std::size_t>(u) + 1]);
  layer[static_cast<std::size_t>(s_max) + 1] = cdf[static_cast<std::size_t>(s_max) + 1];

  double total = 0.0;
  for (int kappa = 0; kappa <= s_max; ++kappa)
    total += ngc_conditional_from_layers(p.n, kappa, s_max, layer) * failure_count_pmf(kappa, p.n, p.p_e);
  return detail::clamp_probability(total);
}

/// Closed form of ngc_latency_cdf for rho = 0, where all layers share the shift
/// delta = t - gamma - eps and the per-layer terms become Poisson weights.
inline double ngc_latency_cdf_zero_shift(double t, int s_max, const ClusterParams& p) {
  p.validate();
  if (p.rho != 0.0) throw InvalidParams("zero-shift evaluator requires rho = 0");
  if (s_max < 0 || s_max > p.n - 1) throw InvalidParams("s_max must lie in [0, n-1]");
  const double delta = t - p.gamma - p.eps;
  if (!(delta > 0.0)) return 0.0;
  if (std::isinf(delta)) {
    double reachable = 0.0;
    for (int kappa = 0; kappa <= s_max; ++kappa) reachable += failure_count_pmf(kappa, p.n, p.p_e);
    return detail::clamp_probability(reachable);
  }
  const double mean = p.lambda * delta;
  const double log_mean = std::log(mean);

  // P(T^(s_max+1) <= t) = 1 - sum_{v <= s_max} Poisson(v; mean).
  double head = 0.0;
  for (int v = 0; v <= s_max; ++v) head += detail::poisson_pmf(v, mean);
  const double top = detail::clamp_probability(1.0 - head);

  double total = 0.0;
  for (int kappa = 0; kappa <= s_max; ++kappa) {
    const int alive = p.n - kappa;
    double undecodable = 0.0;
    detail::for_each_undecodable_occupancy(p.n, kappa, s_max, [&](std::span<const int> counts) {
      // exp(-mean)^(i_0 + ... + i_s) * prod_u (mean^u / u!)^(i_u) * top^(i_{s+1})
      const int below_top = alive - counts[static_cast<std::size_t>(s_max) + 1];
      double log_w = detail::log_multinomial(alive, counts) - mean * below_top;
      for (int u = 1; u <= s_max; ++u)
        log_w += counts[static_cast<std::size_t>(u)] * (u * log_mean - detail::log_factorial(u));
      undecodable += std::exp(log_w) * detail::power(top, counts[static_cast<std::size_t>(s_max) + 1]);
    });
    total += detail::clamp_probability(1.0 - undecodable) * failure_count_pmf(kappa, p.n, p.p_e);
  }
  return detail::clamp_probability(total);
}

/// Scheme selector shared by the analytic and simulated paths.
struct Scheme {
  enum class Kind { Uncoded, GC, NGC };
  Kind kind = Kind::Uncoded;
  int tolerance = 0;

  static Scheme uncoded() { return {Kind::Uncoded, 0}; }
  static Scheme gc(int sigma) { return {Kind::GC, sigma}; }
  static Scheme ngc(int s_max) { return {Kind::NGC, s_max}; }

  std::string label() const {
    switch (kind) {
      case Kind::Uncoded: return "uncoded";
      case Kind::GC: return "gc(" + std::to_string(tolerance) + ")";
      case Kind::NGC: return "ngc(" + std::to_string(tolerance) + ")";
    }
    return {};
  }

  /// Accepts "uncoded", "gc(3)", "gc3", "gc:3" and the same forms for ngc.
  static Scheme parse(const std::string& text) {
    if (text == "uncoded") return uncoded();
    auto number_after = [&](std::size_t prefix) -> int {
      std::string rest = text.substr(prefix);
      if (!rest.empty() && (rest.front() == '(' || rest.front() == ':')) {
        if (rest.front() == '(') {
          if (rest.back() != ')') throw InvalidArgument("bad scheme '" + text + "'");
          rest = rest.substr(1, rest.size() - 2);
        } else {
          rest = rest.substr(1);
        }
      }
      if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw InvalidArgument("bad scheme '" + text + "'");
      return std::stoi(rest);
    };
    if (text.rfind("ngc", 0) == 0) return ngc(number_after(3));
    if (text.rfind("gc", 0) == 0) return gc(number_after(2));
    throw InvalidArgument("unknown scheme '" + text + "'");
  }

  friend bool operator==(const Scheme&, const Scheme&) = default;
};

inline double scheme_latency_cdf(const Scheme& scheme, double t, const ClusterParams& p) {
  switch (scheme.kind) {
    case Scheme::Kind::Uncoded: return gc_latency_cdf(t, 0, p);
    case Scheme::Kind::GC: return gc_latency_cdf(t, scheme.tolerance, p);
    case Scheme::Kind::NGC: return ngc_latency_cdf(t, scheme.tolerance, p);
  }
  return 0.0;
}

inline void require_increasing(std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("time grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
}

inline LatencyCurve latency_curve(const Scheme& scheme, std::span<const double> grid, const ClusterParams& p) {
  require_increasing(grid);
  LatencyCurve curve{{grid.begin(), grid.end()}, {}, scheme.label()};
  curve.values.reserve(grid.size());
  for (double t : grid) curve.values.push_back(scheme_latency_cdf(scheme, t, p));
  // Guard monotonicity against last-bit rounding in 1 - sum.
  for (std::size_t i = 1; i < curve.values.size(); ++i)
    curve.values[i] = std::max(curve.values[i], curve.values[i - 1]);
  return curve;
}

/// Evenly spaced grid with `steps` points on [t_min, t_max].
inline std::vector<double> linear_grid(double t_min, double t_max, int steps) {
  if (!(t_min < t_max)) throw InvalidArgument("t_min must be below t_max");
  if (steps < 2) throw InvalidArgument("need at least 2 grid steps");
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    g[static_cast<std::size_t>(i)] = t_min + (t_max - t_min) * static_cast<double>(i) / (steps - 1);
  g.back() = t_max;
  return g;
}

/// Largest absolute pointwise gap between two curves on the same grid.
inline double sup_distance(const LatencyCurve& a, const LatencyCurve& b) {
  if (a.values.size() != b.values.size()) throw InvalidArgument("curves sampled on different grids");
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

/// Dvoretzky-Kiefer-Wolfowitz half-width sqrt(ln(2/alpha) / (2N)).
inline double dkw_half_width(long samples, double alpha) {
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(samples)));
}

}  // namespace ngc
