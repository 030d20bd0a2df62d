// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipshift/densities.hpp"
#include "lipshift/error.hpp"
#include "lipshift/harness.hpp"
#include "lipshift/lipfit.hpp"
#include "lipshift/prooflab.hpp"
#include "lipshift/quadrature.hpp"
#include "lipshift/rng.hpp"
#include "lipshift/spread.hpp"
#include "lipshift/transfer.hpp"

using namespace lipshift;
using nlohmann::json;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitExperiment = 2;
constexpr int kExitConfig = 3;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json load_json(const std::string& arg) {
  try {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + arg);
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid JSON: ") + e.what());
  }
}

/// Two numeric columns; blank lines, '#' comments and a header row are skipped.
RegressionSample read_xy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
  std::vector<double> x, y;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line.front() == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double a = 0.0, b = 0.0;
    if (!(fields >> a >> b)) {
      if (x.empty() && row == 1) continue;
      throw Error(ErrorCode::ConfigError, path + ":" + std::to_string(row) + ": expected x,y");
    }
    x.push_back(a);
    y.push_back(b);
  }
  return RegressionSample(std::move(x), std::move(y));
}

int run_spread(const std::string& dist_arg, long n, int grid) {
  const DesignDistribution d = parse_distribution(load_json(dist_arg));
  const SpreadFunction s(d, n);
  std::cout << "x,t_n,lo,hi,t_n_prime\n";
  for (double x : linspace(0.0, 1.0, grid)) {
    std::string lo, hi, prime;
    try {
      const SpreadBounds b = closed_form_bounds(s, x);
      lo = fmt(b.lo);
      hi = fmt(b.hi);
    } catch (const Error&) {
    }
    try {
      prime = fmt(spread_derivative(s, x));
    } catch (const Error&) {
    }
    std::cout << fmt(x) << ',' << fmt(s(x)) << ',' << lo << ',' << hi << ',' << prime << '\n';
  }
  return 0;
}

int run_fit(const std::string& data, double budget) {
  const RegressionSample sample = read_xy_csv(data);
  const LipschitzFit fit = fit_lipschitz_lse(sample, budget);
  std::cout << "# objective=" << fmt(fit.objective) << ",kkt_residual=" << fmt(fit.kkt_residual) << '\n';
  std::cout << "x,f\n";
  for (std::size_t i = 0; i < fit.knots.size(); ++i) std::cout << fmt(fit.knots[i]) << ',' << fmt(fit.values[i]) << '\n';
  return 0;
}

int run_transfer(const std::string& source, const std::string& target, const std::string& source_dist,
                 const std::string& target_dist, double budget, int grid) {
  const TwoSampleData data{read_xy_csv(source), read_xy_csv(target), parse_distribution(load_json(source_dist)),
                           parse_distribution(load_json(target_dist))};
  const TransferFit fit = fit_transfer(data, budget);
  std::cout << "x,fit1,fit2,selector,combined,t_hat_P,t_hat_Q\n";
  for (double x : linspace(0.0, 1.0, grid)) {
    std::cout << fmt(x) << ',' << fmt(fit.fit1(x)) << ',' << fmt(fit.fit2(x)) << ',' << fit.selector(x) << ','
              << fmt(fit(x)) << ',' << fmt(fit.spread_source(x)) << ',' << fmt(fit.spread_target(x)) << '\n';
  }
  return 0;
}

int run_doubling(const std::string& dist_arg, double eta_max) {
  const DesignDistribution d = parse_distribution(load_json(dist_arg));
  std::cout << "doubling_constant=" << fmt(doubling_constant(d, eta_max)) << '\n';
  return 0;
}

// prooflab checks -----------------------------------------------------------

struct CheckLine {
  std::string name;
  bool pass;
  std::string detail;
};

int report(const std::vector<CheckLine>& lines) {
  bool all = true;
  for (const auto& l : lines) {
    std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << ": " << l.detail << '\n';
    all = all && l.pass;
  }
  return all ? 0 : kExitFailedCheck;
}

DesignDistribution dist_or_uniform(const json& c, const char* key) {
  return c.contains(key) ? parse_distribution(c.at(key)) : DesignDistribution::uniform();
}

std::vector<CheckLine> check_perturbation_suite(const json& c) {
  const DesignDistribution d = dist_or_uniform(c, "dist");
  const long n = c.value("n", 1000L);
  const double delta = c.value("delta", 0.5);
  const double K = c.value("K", 1.0);
  const int instances = c.value("instances", 50);
  const int grid_size = c.value("grid", 10001);
  const SpreadFunction s(d, n);
  const auto grid = linspace(0.0, 1.0, grid_size);
  Rng rng(c.value("seed", std::uint64_t{1}));
  int ok[4] = {0, 0, 0, 0};
  double worst_lip = 0.0, worst_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < instances; ++i) {
    const PerturbationInstance inst = random_perturbation_instance(s, delta, K, grid, rng);
    const Perturbation p = build_perturbation(inst.psi, inst.f, delta, s, K, grid);
    const PerturbationReport r = check_perturbation(p, grid);
    const double pos_slack = 2.0 * r.grid_spacing;
    ok[0] += r.lipschitz_ok(1e-9) && r.support_ok(1e-9);
    ok[1] += r.ordering_ok(1e-9);
    ok[2] += r.outer_ok(pos_slack) && r.inner_ok(pos_slack);
    ok[3] += r.gap_ok(1e-9);
    worst_lip = std::max(worst_lip, r.lipschitz_g);
    worst_gap = std::min(worst_gap, r.gap_min);
  }
  auto line = [&](const char* name, int k, const std::string& extra) {
    return CheckLine{name, k == instances, std::to_string(k) + "/" + std::to_string(instances) + extra};
  };
  return {line("perturbation (i) Lipschitz and support", ok[0], " max Lip(g)=" + fmt(worst_lip)),
          line("perturbation (ii) ordering", ok[1], ""), line("perturbation (iii) localisation", ok[2], ""),
          line("perturbation (iv) gap", ok[3], " min gap=" + fmt(worst_gap))};
}

std::vector<CheckLine> check_cover_suite(const json& c) {
  const double a = c.value("a", 0.0);
  const double b = c.value("b", 1.0);
  const int trials = c.value("trials", 200);
  const auto radii = c.value("r", std::vector<double>{0.1, 0.2});
  const auto grid = linspace(a, b, c.value("grid", 4001));
  Rng rng(c.value("seed", std::uint64_t{2}));
  std::vector<CheckLine> out;
  for (double r : radii) {
    const int k = cover_cells(a, b, r);
    int covered = 0;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      const PiecewiseLinear g = random_supported_lipschitz(a, b, 4 + static_cast<int>(rng.uniform() * 28.0), rng);
      const PiecewiseLinear center = cover_center_for(g, a, b, r, grid);
      double dist = 0.0;
      for (double x : grid) dist = std::max(dist, std::abs(g(x) - center(x)));
      worst = std::max(worst, dist);
      covered += dist <= r + 1e-12;
    }
    out.push_back({"cover r=" + fmt(r), covered == trials,
                   std::to_string(covered) + "/" + std::to_string(trials) + " covered, |H|=3^" + std::to_string(k) +
                       ", worst sup distance=" + fmt(worst)});
  }
  return out;
}

std::vector<CheckLine> check_kl_suite(const json& c) {
  const double h = c.value("h", 0.1);
  const long n = c.value("n", 100L);
  const long m = c.value("m", 0L);
  const DesignDistribution P = dist_or_uniform(c, "P");
  const DesignDistribution Q = dist_or_uniform(c, "Q");
  auto bump = [h](double x) { return std::max(0.0, h - std::abs(x - 0.5)); };
  auto zero = [](double) { return 0.0; };
  const double kl = kl_divergence(bump, zero, P, Q, n, m);
  const double swapped = kl_divergence(zero, bump, P, Q, n, m);
  std::vector<CheckLine> out{{"kl symmetry", std::abs(kl - swapped) <= 1e-12, "kl=" + fmt(kl) + " swapped=" + fmt(swapped)}};
  if (c.contains("expected")) {
    const double expected = c.at("expected").get<double>();
    out.push_back({"kl value", std::abs(kl - expected) <= 1e-6, "expected=" + fmt(expected)});
  }
  return out;
}

std::vector<CheckLine> check_lowerbound_suite(const json& c) {
  const DesignDistribution P = dist_or_uniform(c, "P");
  const DesignDistribution Q = dist_or_uniform(c, "Q");
  const long n = c.value("n", 10000L);
  const long m = c.value("m", 0L);
  const HypothesisFamily fam = build_lower_bound_family(P, Q, n, m);
  const auto grid = linspace(0.0, 1.0, c.value("grid", 20001));
  const double sep = family_separation(fam, grid);
  const double kl = family_mean_kl(fam);
  const double logN = std::log(static_cast<double>(fam.N));
  const double count_bound = fam.two_b * std::cbrt(static_cast<double>(fam.N) / logN);
  return {{"separation", sep >= 1.0 / 6.0 - 0.01, "min weighted distance=" + fmt(sep)},
          {"mean KL", kl <= logN / 36.0, "mean KL=" + fmt(kl) + " bound=" + fmt(logN / 36.0)},
          {"kept intervals", static_cast<double>(fam.kept.size()) >= count_bound,
           std::to_string(fam.kept.size()) + " kept, bound=" + fmt(count_bound) + ", N0=" + fmt(fam.N0)}};
}

std::vector<CheckLine> check_transfer_exponent_suite(const json& c) {
  const DesignDistribution P = c.contains("P") ? parse_distribution(c.at("P")) : DesignDistribution::power(1.0);
  const DesignDistribution Q = dist_or_uniform(c, "Q");
  const double gamma = c.value("gamma", 1.0);
  const int k_min = c.value("k_min", 3);
  const int k_max = c.value("k_max", 10);
  std::vector<double> etas;
  for (int k = k_min; k <= k_max; ++k) etas.push_back(std::ldexp(1.0, -k));
  const auto x_grid = linspace(0.0, 1.0, c.value("grid", 65537));
  const auto profile = transfer_exponent_profile(P, Q, gamma, etas, x_grid);
  std::ostringstream values;
  for (std::size_t i = 0; i < profile.size(); ++i) values << (i ? " " : "") << fmt(profile[i]);
  const std::string verdict = profile_settles(profile) ? "bounded" : "diverging";
  const std::string expect = c.value("expect", verdict);
  return {{"transfer exponent gamma=" + fmt(gamma), verdict == expect, verdict + "; profile " + values.str()}};
}

int run_prooflab(const std::string& check, const std::string& config_arg) {
  const json c = config_arg.empty() ? json::object() : load_json(config_arg);
  try {
    if (check == "perturbation") return report(check_perturbation_suite(c));
    if (check == "cover") return report(check_cover_suite(c));
    if (check == "kl") return report(check_kl_suite(c));
    if (check == "lowerbound") return report(check_lowerbound_suite(c));
    if (check == "transfer-exponent") return report(check_transfer_exponent_suite(c));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid prooflab config: ") + e.what());
  }
  throw Error(ErrorCode::ConfigError, "unknown check '" + check + "'");
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, std::string output,
                 unsigned threads) {
  json j = load_json(config_path);
  if (seed && j.is_object()) j["seed"] = *seed;
  const ExperimentConfig config = parse_config(j);
  if (output.empty()) output = config.output.empty() ? "." : config.output;
  std::filesystem::create_directories(output);
  const RateReport rep = run_rate_experiment(config, threads);
  write_losses_csv(rep, (std::filesystem::path(output) / "losses.csv").string());
  write_report_json(rep, (std::filesystem::path(output) / "report.json").string());
  for (const auto& s : rep.slopes) {
    std::cout << s.estimator << ' ' << s.loss;
    if (s.m) std::cout << " m=" << s.m;
    if (s.defined) {
      std::cout << " slope=" << s.fit.slope << " (se " << s.fit.std_error << ")\n";
    } else {
      std::cout << " slope undefined: " << s.note << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lipshift: local rates for Lipschitz regression under covariate shift"};
  app.require_subcommand(1);

  std::string dist, data, source, target, source_dist, target_dist, check, config, output;
  long n = 100;
  int grid = 101;
  double budget = 1.0, eta_max = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  auto* spread = app.add_subcommand("spread", "Spread function, bounds and derivative on a grid");
  spread->add_option("--dist", dist, "Distribution JSON (inline or file)")->required();
  spread->add_option("--n", n, "Sample size")->required();
  spread->add_option("--grid", grid, "Number of grid points")->check(CLI::Range(2, 1 << 24));

  auto* fit = app.add_subcommand("fit", "Lipschitz least squares fit of x,y data");
  fit->add_option("--data", data, "CSV with columns x,y")->required();
  fit->add_option("--budget", budget, "Lipschitz constant");

  auto* transfer = app.add_subcommand("transfer", "Covariate-shift transfer estimator");
  transfer->add_option("--source", source, "Source CSV x,y")->required();
  transfer->add_option("--target", target, "Target CSV x,y")->required();
  transfer->add_option("--source-dist", source_dist, "Source design JSON")->required();
  transfer->add_option("--target-dist", target_dist, "Target design JSON")->required();
  transfer->add_option("--budget", budget, "Lipschitz constant");
  transfer->add_option("--grid", grid, "Number of grid points")->check(CLI::Range(2, 1 << 24));

  auto* doubling = app.add_subcommand("doubling-check", "Grid estimate of the local doubling constant");
  doubling->add_option("--dist", dist, "Distribution JSON (inline or file)")->required();
  doubling->add_option("--eta-max", eta_max, "Largest window half-width");

  auto* prooflab = app.add_subcommand("prooflab", "Numerical checks of the proof constructions");
  prooflab->add_option("--check", check, "Which check")
      ->required()
      ->check(CLI::IsMember({"perturbation", "cover", "kl", "lowerbound", "transfer-exponent"}));
  prooflab->add_option("--config", config, "Check parameters (JSON inline or file)");

  auto* simulate = app.add_subcommand("simulate-rates", "Monte Carlo rate experiment");
  simulate->add_option("--config", config, "Experiment config JSON file")->required();
  auto* seed_opt = simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--output", output, "Output directory (default: config output)");
  simulate->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*spread) return run_spread(dist, n, grid);
    if (*fit) return run_fit(data, budget);
    if (*transfer) return run_transfer(source, target, source_dist, target_dist, budget, grid);
    if (*doubling) return run_doubling(dist, eta_max);
    if (*prooflab) return run_prooflab(check, config);
    if (*simulate) {
      return run_simulate(config, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, output, threads);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::ConfigError) return kExitConfig;
    if (e.code() == ErrorCode::ExperimentError) return kExitExperiment;
    return kExitExperiment;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExperiment;
  }
  return 0;
}
