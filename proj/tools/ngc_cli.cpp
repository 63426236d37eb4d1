// ngc: construct, verify and evaluate nested gradient codes.
//
// Exit codes: 0 success, 1 validation error, 2 numerical/construction failure.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ngc/codes.hpp"
#include "ngc/experiment.hpp"
#include "ngc/serialize.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

void add_cluster_flags(CLI::App& app, ngc::ClusterParams& p) {
  app.add_option("--n", p.n, "number of workers")->capture_default_str();
  app.add_option("--lambda", p.lambda, "exponential service rate")->capture_default_str();
  app.add_option("--rho", p.rho, "deterministic time per task")->capture_default_str();
  app.add_option("--gamma", p.gamma, "communication delay")->capture_default_str();
  app.add_option("--eps", p.eps, "signaling overhead")->capture_default_str();
  app.add_option("--pe", p.p_e, "per-worker failure probability")->capture_default_str();
}

void add_grid_flags(CLI::App& app, ngc::ExperimentConfig& c, std::vector<std::string>& schemes) {
  app.add_option("--t-min", c.t_min, "first grid point (t - gamma axis)")->capture_default_str();
  app.add_option("--t-max", c.t_max, "last grid point (t - gamma axis)")->capture_default_str();
  app.add_option("--steps", c.steps, "number of grid points")->capture_default_str();
  app.add_option("--schemes", schemes, "comma-separated list: uncoded, gc(s), ngc(s)")
      ->delimiter(',')
      ->capture_default_str();
}

/// Writes to `path`, or stdout when empty or "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ngc::InvalidArgument("cannot open " + path + " for writing");
  fn(out);
  if (!out) throw ngc::InvalidArgument("failed writing " + path);
}

std::vector<ngc::Scheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<ngc::Scheme> out;
  for (const auto& s : names) out.push_back(ngc::Scheme::parse(s));
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
  return s;
}

bool print_verification(const ngc::NestedGradientCode& code, double tol, int cap) {
  bool ok = true;
  for (const auto& c : code.components()) {
    const auto r = ngc::verify_gradient_code(c, c.sigma(), tol, cap);
    std::cout << "  sigma=" << c.sigma() << " support>=" << c.sigma() + 1 << ':' << (r.support_ok ? "ok" : "FAIL")
              << " subsets(" << r.subsets_checked << "):" << (r.all_subsets_decodable ? "ok" : "FAIL")
              << " stacked:" << (r.stacked_ok ? "ok" : "FAIL") << " max_residual=" << r.max_residual << '\n';
    ok = ok && r.passed();
  }
  const auto nesting = ngc::verify_nesting(code);
  std::cout << "  nesting: " << (nesting.nested ? "ok" : "FAIL");
  if (nesting.violation)
    std::cout << " (sigma=" << nesting.violation->first << ", row=" << nesting.violation->second + 1 << ')';
  std::cout << '\n';
  return ok && nesting.nested;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested gradient codes: construction, verification, latency analysis and simulation"};
  app.require_subcommand(1);
  // One file for all subcommands: keys go in a [construct], [analyze], ... table.
  app.set_config("--config", "", "TOML config file")->check(CLI::ExistingFile);
  app.fallthrough();

  // construct
  int c_n = 8, c_smax = 3;
  std::uint64_t c_seed = 42;
  std::string c_out;
  auto* construct = app.add_subcommand("construct", "build a nested gradient code and write it as JSON");
  construct->add_option("--n", c_n, "number of workers")->capture_default_str();
  construct->add_option("--smax", c_smax, "largest straggler tolerance")->capture_default_str();
  construct->add_option("--seed", c_seed, "construction seed")->capture_default_str();
  construct->add_option("--out", c_out, "output path")->required();

  // verify
  std::string v_in;
  double v_tol = ngc::kDefaultDecodeTolerance;
  int v_cap = ngc::kDefaultVerificationCap;
  auto* verify = app.add_subcommand("verify", "exhaustively verify a serialized code");
  verify->add_option("--in,in", v_in, "code file")->required();
  verify->add_option("--tol", v_tol, "decoding residual tolerance")->capture_default_str();
  verify->add_option("--cap", v_cap, "largest n for exhaustive enumeration")->capture_default_str();

  // analyze
  ngc::ExperimentConfig a_cfg;
  std::vector<std::string> a_schemes{"uncoded", "gc(1)", "gc(2)", "gc(4)", "gc(6)", "ngc(2)", "ngc(4)", "ngc(6)"};
  std::string a_out;
  auto* analyze = app.add_subcommand("analyze", "analytic latency CDFs as CSV");
  add_cluster_flags(*analyze, a_cfg.cluster);
  add_grid_flags(*analyze, a_cfg, a_schemes);
  analyze->add_option("--out", a_out, "CSV path (default stdout)");

  // simulate
  ngc::ExperimentConfig s_cfg;
  std::vector<std::string> s_schemes = a_schemes;
  std::string s_out, s_load_out;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo latency CDFs and load statistics as CSV");
  add_cluster_flags(*simulate, s_cfg.cluster);
  add_grid_flags(*simulate, s_cfg, s_schemes);
  simulate->add_option("--trials", s_cfg.trials, "trials per scheme")->capture_default_str();
  simulate->add_option("--seed", s_cfg.seed, "simulation seed")->capture_default_str();
  simulate->add_option("--threads", s_cfg.threads, "worker threads")->capture_default_str();
  simulate->add_option("--termination-delay", s_cfg.termination_delay, "extra stop-signal delay for NGC")
      ->capture_default_str();
  simulate->add_option("--out", s_out, "curve CSV path (default stdout)");
  simulate->add_option("--load-out", s_load_out, "load CSV path (default <out>.load.csv, or stdout)");

  // gd-demo
  ngc::DescentDemoConfig g_cfg;
  std::string g_out;
  auto* gd = app.add_subcommand("gd-demo", "coded gradient descent on synthetic least squares");
  add_cluster_flags(*gd, g_cfg.cluster);
  gd->add_option("--m", g_cfg.m, "data rows")->capture_default_str();
  gd->add_option("--c", g_cfg.c, "features")->capture_default_str();
  gd->add_option("--noise", g_cfg.noise, "label noise standard deviation")->capture_default_str();
  gd->add_option("--iterations", g_cfg.iterations, "descent iterations")->capture_default_str();
  gd->add_option("--eta", g_cfg.eta, "learning rate")->capture_default_str();
  gd->add_option("--smax", g_cfg.s_max, "largest straggler tolerance")->capture_default_str();
  gd->add_option("--seed", g_cfg.seed, "seed")->capture_default_str();
  gd->add_option("--out", g_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*construct) {
      const auto code = ngc::build_ngc(c_n, c_smax, c_seed);
      ngc::save_code(code, c_out);
      std::cout << "wrote (" << code.n() << ", " << code.n() << ", " << code.s_max() << ") nested code to " << c_out
                << '\n';
      for (const auto& comp : code.components())
        std::cout << "  sigma=" << comp.sigma() << " row 1 support={" << join(comp.support(0)) << "}\n";
      if (code.n() <= ngc::kDefaultVerificationCap && !print_verification(code, ngc::kDefaultDecodeTolerance,
                                                                          ngc::kDefaultVerificationCap))
        return kExitNumerical;
    } else if (*verify) {
      const auto code = ngc::load_code(v_in);
      std::cout << "(" << code.n() << ", " << code.n() << ", " << code.s_max() << ") nested code, seed " << code.seed()
                << '\n';
      if (!print_verification(code, v_tol, v_cap)) return kExitNumerical;
    } else if (*analyze) {
      a_cfg.schemes = parse_schemes(a_schemes);
      const auto curves = ngc::analyze(a_cfg);
      with_output(a_out, [&](std::ostream& os) { ngc::write_curves_csv(os, curves); });
    } else if (*simulate) {
      s_cfg.schemes = parse_schemes(s_schemes);
      const auto report = ngc::simulate(s_cfg);
      with_output(s_out, [&](std::ostream& os) { ngc::write_curves_csv(os, report.curves); });
      std::string load_path = s_load_out;
      if (load_path.empty() && !s_out.empty() && s_out != "-") {
        load_path = s_out;
        if (load_path.size() > 4 && load_path.ends_with(".csv")) load_path.resize(load_path.size() - 4);
        load_path += ".load.csv";
      }
      with_output(load_path, [&](std::ostream& os) { ngc::write_load_csv(os, report); });
    } else if (*gd) {
      const auto result = ngc::gd_demo(g_cfg);
      with_output(g_out, [&](std::ostream& os) { ngc::write_descent_csv(os, result.run); });
      std::cerr << "final loss " << result.run.records.back().loss << ", optimum " << result.optimum_loss
                << ", max recovery error " << result.max_recovery_error << '\n';
      if (result.max_recovery_error > 1e-6) return kExitNumerical;
    }
  } catch (const ngc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.category() == ngc::ErrorCategory::Validation ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
