// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>
#include <tuple>

#include "lipshift/error.hpp"
#include "lipshift/quadrature.hpp"
#include "lipshift/rng.hpp"
#include "lipshift/spread.hpp"
#include "lipshift/transfer.hpp"

namespace lipshift {

double F0Spec::operator()(double x) const {
  switch (kind) {
    case F0Kind::Zero: return 0.0;
    case F0Kind::Triangle: return slope * std::max(0.0, 0.25 - std::abs(x - center));
    case F0Kind::Sine: return amplitude * std::sin(2.0 * std::numbers::pi * frequency * x);
  }
  return 0.0;
}

double F0Spec::lipschitz_constant() const {
  switch (kind) {
    case F0Kind::Zero: return 0.0;
    case F0Kind::Triangle: return std::abs(slope);
    case F0Kind::Sine: return std::abs(amplitude) * 2.0 * std::numbers::pi * std::abs(frequency);
  }
  return 0.0;
}

std::string EstimatorSpec::name() const {
  switch (kind) {
    case EstimatorKind::Lse: return "lse";
    case EstimatorKind::Isotonic: return "isotonic";
    case EstimatorKind::Transfer: return "transfer";
    case EstimatorKind::Kernel: {
      if (adaptive_bandwidth) return "kernel(adaptive)";
      char buf[64];
      std::snprintf(buf, sizeof buf, "kernel(h=%g)", bandwidth);
      return buf;
    }
  }
  return "unknown";
}

std::string to_string(LossKind loss) {
  switch (loss) {
    case LossKind::WeightedSup: return "weighted_sup";
    case LossKind::Sup: return "sup";
    case LossKind::L2Q: return "l2_q";
    case LossKind::DensityWeightedSup: return "density_weighted_sup";
  }
  return "unknown";
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

F0Spec parse_f0(const nlohmann::json& j) {
  F0Spec f0;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") {
    f0.kind = F0Kind::Zero;
  } else if (kind == "triangle") {
    f0.kind = F0Kind::Triangle;
    f0.center = j.value("center", 0.5);
    f0.slope = j.value("slope", 0.5);
  } else if (kind == "sine") {
    f0.kind = F0Kind::Sine;
    f0.amplitude = j.at("amplitude").get<double>();
    f0.frequency = j.value("frequency", 1.0);
  } else {
    config_error("unknown f0 kind '" + kind + "'");
  }
  return f0;
}

EstimatorSpec parse_estimator(const nlohmann::json& j) {
  EstimatorSpec e;
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  if (kind == "lse") {
    e.kind = EstimatorKind::Lse;
  } else if (kind == "isotonic") {
    e.kind = EstimatorKind::Isotonic;
  } else if (kind == "transfer") {
    e.kind = EstimatorKind::Transfer;
  } else if (kind == "kernel") {
    e.kind = EstimatorKind::Kernel;
    if (j.is_object() && j.contains("bandwidth") && !j.at("bandwidth").is_string()) {
      e.adaptive_bandwidth = false;
      e.bandwidth = j.at("bandwidth").get<double>();
      if (!(e.bandwidth > 0.0)) config_error("kernel bandwidth must be positive");
    } else if (j.is_object() && j.contains("bandwidth") && j.at("bandwidth").get<std::string>() != "adaptive") {
      config_error("kernel bandwidth must be a number or \"adaptive\"");
    }
  } else {
    config_error("unknown estimator '" + kind + "'");
  }
  return e;
}

LossKind parse_loss(const std::string& s) {
  if (s == "weighted_sup") return LossKind::WeightedSup;
  if (s == "sup") return LossKind::Sup;
  if (s == "l2_q") return LossKind::L2Q;
  if (s == "density_weighted_sup") return LossKind::DensityWeightedSup;
  config_error("unknown loss '" + s + "'");
}

std::vector<long> parse_grid(const nlohmann::json& j, const char* name) {
  auto v = j.get<std::vector<long>>();
  if (v.empty()) config_error(std::string(name) + " must be nonempty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 2) config_error(std::string(name) + " entries must be >= 2");
    if (i > 0 && v[i] <= v[i - 1]) config_error(std::string(name) + " must be strictly ascending");
  }
  return v;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) config_error("config must be a JSON object");
    c.source = j;
    if (j.contains("design")) {
      c.design = parse_distribution(j.at("design"));
    } else if (j.contains("distribution")) {
      c.design = parse_distribution(j.at("distribution"));
    }
    if (j.contains("target_design")) c.target_design = parse_distribution(j.at("target_design"));
    c.f0 = j.contains("f0") ? parse_f0(j.at("f0")) : F0Spec{};
    c.delta = j.value("delta", 0.1);
    if (!(c.delta > 0.0 && c.delta < 1.0)) config_error("delta must lie in (0, 1)");
    if (c.f0.lipschitz_constant() > 1.0 - c.delta + 1e-12) {
      config_error("f0 has Lipschitz constant " + std::to_string(c.f0.lipschitz_constant()) + " above 1 - delta");
    }
    c.n_grid = parse_grid(j.at("n_grid"), "n_grid");
    if (j.contains("m_grid")) c.m_grid = parse_grid(j.at("m_grid"), "m_grid");
    c.replicates = j.value("replicates", 1);
    if (c.replicates < 1) config_error("replicates must be >= 1");
    c.seed = j.value("seed", std::uint64_t{0});
    c.noise_sd = j.value("noise_sd", 1.0);
    if (!(c.noise_sd >= 0.0)) config_error("noise_sd must be non-negative");
    c.budget = j.value("budget", 1.0);
    if (!(c.budget > 0.0 && c.budget <= 1.0)) config_error("budget must lie in (0, 1]");
    if (j.contains("estimators")) {
      for (const auto& e : j.at("estimators")) c.estimators.push_back(parse_estimator(e));
    } else {
      c.estimators.push_back(EstimatorSpec{});
    }
    if (c.estimators.empty()) config_error("estimators must be nonempty");
    if (j.contains("losses")) {
      for (const auto& l : j.at("losses")) c.losses.push_back(parse_loss(l.get<std::string>()));
    } else {
      c.losses = {LossKind::WeightedSup, LossKind::Sup};
    }
    if (c.losses.empty()) config_error("losses must be nonempty");
    const bool transfer = std::any_of(c.estimators.begin(), c.estimators.end(),
                                      [](const EstimatorSpec& e) { return e.kind == EstimatorKind::Transfer; });
    if (transfer && (c.m_grid.empty() || !c.target_design)) {
      config_error("transfer estimator needs m_grid and target_design");
    }
    c.eval_points = j.value("eval_points", 201);
    if (c.eval_points < 3) config_error("eval_points must be >= 3");
    c.quadrature_nodes = j.value("quadrature_nodes", 2049);
    if (c.quadrature_nodes < 16) config_error("quadrature_nodes must be >= 16");
    c.output = j.value("output", std::string("."));
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
  return c;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.source.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RegressionSample generate(const ExperimentConfig& config, const DesignDistribution& design, long n,
                          std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "sample size must be positive");
  Rng rng(seed);
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& xi : x) xi = design.quantile(rng.uniform());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = config.f0(x[i]) + config.noise_sd * rng.normal();
  return RegressionSample(std::move(x), std::move(y));
}

RegressionSample generate(const ExperimentConfig& config, long n, std::uint64_t seed) {
  return generate(config, config.design, n, seed);
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) { return derive_seed(seed, replicate); }

const LossSummary* RateReport::find(const std::string& estimator, const std::string& loss, long n, long m) const {
  for (const auto& s : summaries) {
    if (s.estimator == estimator && s.loss == loss && s.n == n && s.m == m) return &s;
  }
  return nullptr;
}

const SlopeSummary* RateReport::find_slope(const std::string& estimator, const std::string& loss, long m) const {
  for (const auto& s : slopes) {
    if (s.estimator == estimator && s.loss == loss && s.m == m) return &s;
  }
  return nullptr;
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw Error(ErrorCode::InvalidInput, "slope fit needs at least 3 points");
  std::vector<double> lx, ly;
  for (const auto& [n, loss] : points) {
    if (!(loss > 0.0) || !(n > 0.0)) throw Error(ErrorCode::InvalidInput, "slope fit needs positive n and loss");
    lx.push_back(std::log(n));
    ly.push_back(std::log(loss));
  }
  const double k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::InvalidInput, "slope fit needs distinct n values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - my - fit.slope * (lx[i] - mx);
    ssr += r * r;
  }
  fit.std_error = std::sqrt(ssr / (k - 2.0) / sxx);
  return fit;
}

namespace {

struct Cell {
  std::size_t n_index;
  long m;
  bool transfer;  // transfer cells run only the transfer estimator
  int replicate;
};

struct CellResult {
  std::vector<LossRecord> records;
  std::vector<std::string> failed;  // estimator names that failed
};

// Per-n (and per-m) quantities shared by every replicate.
struct SharedGrid {
  std::vector<double> grid;
  std::vector<double> f0;
  std::vector<double> density;
  std::map<long, std::vector<double>> t_source;  // keyed by n
  std::map<long, std::vector<double>> t_target;  // keyed by m
};

std::vector<double> spread_on_grid(const DesignDistribution& d, long n, const std::vector<double>& grid) {
  const SpreadFunction s(d, n);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = s(grid[i]);
  return out;
}

void add_losses(const ExperimentConfig& config, const SharedGrid& shared, const RealFunction& fit,
                const std::vector<double>& t, const std::string& name, long n, long m, int replicate,
                std::vector<LossRecord>& out) {
  std::vector<double> values(shared.grid.size());
  for (std::size_t i = 0; i < shared.grid.size(); ++i) values[i] = fit(shared.grid[i]);
  const DesignDistribution& q = config.target_design ? *config.target_design : config.design;
  for (LossKind loss : config.losses) {
    double v = 0.0;
    switch (loss) {
      case LossKind::WeightedSup:
        for (std::size_t i = 0; i < values.size(); ++i) v = std::max(v, std::abs(values[i] - shared.f0[i]) / t[i]);
        break;
      case LossKind::Sup:
        for (std::size_t i = 0; i < values.size(); ++i) v = std::max(v, std::abs(values[i] - shared.f0[i]));
        break;
      case LossKind::DensityWeightedSup:
        for (std::size_t i = 0; i < values.size(); ++i) {
          v = std::max(v, std::cbrt(shared.density[i]) * std::abs(values[i] - shared.f0[i]));
        }
        break;
      case LossKind::L2Q: v = l2_risk(fit, config.f0, q, config.quadrature_nodes); break;
    }
    out.push_back({name, to_string(loss), n, m, replicate, v});
  }
}

CellResult run_cell(const ExperimentConfig& config, const SharedGrid& shared, const Cell& cell) {
  CellResult result;
  const long n = config.n_grid[cell.n_index];
  const std::uint64_t rep = replicate_seed(config.seed, static_cast<std::uint64_t>(cell.replicate));
  const RegressionSample sample = generate(config, n, derive_seed(rep, static_cast<std::uint64_t>(n)));
  const auto& t_n = shared.t_source.at(n);

  if (cell.transfer) {
    const auto mm = static_cast<std::uint64_t>(cell.m);
    const RegressionSample target =
        generate(config, *config.target_design, cell.m, derive_seed(rep, (mm << 32) ^ static_cast<std::uint64_t>(n)));
    try {
      const TransferFit fit = fit_transfer(TwoSampleData{sample, target, config.design, *config.target_design},
                                           config.budget);
      const auto& t_m = shared.t_target.at(cell.m);
      std::vector<double> t_min(t_n.size());
      for (std::size_t i = 0; i < t_n.size(); ++i) t_min[i] = std::min(t_n[i], t_m[i]);
      add_losses(config, shared, [&fit](double x) { return fit(x); }, t_min, "transfer", n, cell.m, cell.replicate,
                 result.records);
      add_losses(config, shared, [&fit](double x) { return fit.fit1(x); }, t_min, "transfer_source", n, cell.m,
                 cell.replicate, result.records);
      add_losses(config, shared, [&fit](double x) { return fit.fit2(x); }, t_min, "transfer_target", n, cell.m,
                 cell.replicate, result.records);
    } catch (const Error&) {
      result.failed.push_back("transfer");
    }
    return result;
  }

  for (const auto& est : config.estimators) {
    if (est.kind == EstimatorKind::Transfer) continue;
    try {
      switch (est.kind) {
        case EstimatorKind::Lse: {
          const LipschitzFit fit = fit_lipschitz_lse(sample, config.budget);
          add_losses(config, shared, [&fit](double x) { return fit(x); }, t_n, est.name(), n, 0, cell.replicate,
                     result.records);
          break;
        }
        case EstimatorKind::Kernel: {
          const double nd = static_cast<double>(n);
          const double h = est.adaptive_bandwidth ? std::cbrt(std::log(nd) / nd) : est.bandwidth;
          add_losses(config, shared, [&](double x) { return kernel_smoother(sample, config.design, h, x); }, t_n,
                     est.name(), n, 0, cell.replicate, result.records);
          break;
        }
        case EstimatorKind::Isotonic: {
          const std::vector<double> values = isotonic_pava(sample);
          const auto& xs = sample.x();
          auto fit = [&](double x) {
            auto k = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
            return values[std::min(k, values.size() - 1)];
          };
          add_losses(config, shared, fit, t_n, est.name(), n, 0, cell.replicate, result.records);
          break;
        }
        case EstimatorKind::Transfer: break;
      }
    } catch (const Error&) {
      result.failed.push_back(est.name());
    }
  }
  return result;
}

template <class F>
void parallel_for(std::size_t count, unsigned threads, const F& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

RateReport run_rate_experiment(const ExperimentConfig& config, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  SharedGrid shared;
  shared.grid = linspace(0.0, 1.0, config.eval_points);
  for (double x : shared.grid) {
    shared.f0.push_back(config.f0(x));
    shared.density.push_back(config.design.density(x));
  }
  for (long n : config.n_grid) shared.t_source[n] = spread_on_grid(config.design, n, shared.grid);
  const bool has_transfer = std::any_of(config.estimators.begin(), config.estimators.end(),
                                        [](const EstimatorSpec& e) { return e.kind == EstimatorKind::Transfer; });
  const bool has_single = std::any_of(config.estimators.begin(), config.estimators.end(),
                                      [](const EstimatorSpec& e) { return e.kind != EstimatorKind::Transfer; });
  if (has_transfer) {
    for (long m : config.m_grid) shared.t_target[m] = spread_on_grid(*config.target_design, m, shared.grid);
  }

  std::vector<Cell> cells;
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    if (has_single) {
      for (int r = 0; r < config.replicates; ++r) cells.push_back({ni, 0, false, r});
    }
    if (has_transfer) {
      for (long m : config.m_grid) {
        for (int r = 0; r < config.replicates; ++r) cells.push_back({ni, m, true, r});
      }
    }
  }
  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) { results[i] = run_cell(config, shared, cells[i]); });

  RateReport report;
  using Key = std::tuple<std::string, std::string, long, long>;
  std::map<Key, std::vector<double>> values;
  std::map<std::tuple<std::string, long, long>, int> failures;
  std::vector<Key> order;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const auto& rec : results[i].records) {
      report.records.push_back(rec);
      const Key key{rec.estimator, rec.loss, rec.n, rec.m};
      auto [it, inserted] = values.try_emplace(key);
      if (inserted) order.push_back(key);
      it->second.push_back(rec.value);
    }
    for (const auto& name : results[i].failed) {
      ++failures[{name, config.n_grid[cells[i].n_index], cells[i].m}];
    }
  }

  int total_failures = 0;
  for (const auto& [key, count] : failures) {
    total_failures += count;
    if (count > 0.05 * config.replicates) {
      throw Error(ErrorCode::ExperimentError,
                  std::to_string(count) + " of " + std::to_string(config.replicates) + " replicates failed for " +
                      std::get<0>(key) + " at n=" + std::to_string(std::get<1>(key)));
    }
  }

  for (const auto& key : order) {
    const auto& v = values[key];
    LossSummary s;
    std::tie(s.estimator, s.loss, s.n, s.m) = key;
    s.count = static_cast<int>(v.size());
    const std::string base = s.estimator.rfind("transfer", 0) == 0 ? "transfer" : s.estimator;
    auto f = failures.find({base, s.n, s.m});
    s.failures = f == failures.end() ? 0 : f->second;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std_error = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
    s.median = median_of(v);
    report.summaries.push_back(s);
  }

  // Slopes against n for every (estimator, loss, m) series.
  std::vector<std::tuple<std::string, std::string, long>> series;
  for (const auto& s : report.summaries) {
    const auto key = std::make_tuple(s.estimator, s.loss, s.m);
    if (std::find(series.begin(), series.end(), key) == series.end()) series.push_back(key);
  }
  for (const auto& [est, loss, m] : series) {
    SlopeSummary sl;
    sl.estimator = est;
    sl.loss = loss;
    sl.m = m;
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : report.summaries) {
      if (s.estimator == est && s.loss == loss && s.m == m) pts.emplace_back(static_cast<double>(s.n), s.mean);
    }
    if (pts.size() < 3) {
      sl.note = "fewer than 3 sample sizes";
    } else if (std::any_of(pts.begin(), pts.end(), [](const auto& p) { return !(p.second > 0.0); })) {
      sl.note = "nonpositive mean loss; slope undefined";
    } else {
      sl.fit = fit_loglog_slope(pts);
      sl.defined = true;
    }
    report.slopes.push_back(sl);
  }

  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  nlohmann::json doubling = nlohmann::json::array();
  const double spacing = 1.0 / (config.eval_points - 1);
  for (long n : config.n_grid) {
    const auto& t = shared.t_source.at(n);
    const double t_max = *std::max_element(t.begin(), t.end());
    const double t_min = *std::min_element(t.begin(), t.end());
    const double eta_max = std::sqrt(std::log(static_cast<double>(n))) * t_max;
    nlohmann::json entry{{"n", n}, {"eta_max", eta_max}, {"grid_slack_bound", (1.0 + 1.0 / t_min) * spacing}};
    try {
      entry["doubling_constant"] = doubling_constant(config.design, eta_max);
    } catch (const Error& e) {
      entry["doubling_constant"] = nullptr;
      entry["note"] = e.what();
    }
    doubling.push_back(entry);
  }
  report.metadata = {{"seed", config.seed},
                     {"config_hash", hash},
                     {"replicates", config.replicates},
                     {"eval_points", config.eval_points},
                     {"failures", total_failures},
                     {"design", config.design.to_json()},
                     {"per_n", doubling}};
  return report;
}

nlohmann::json report_to_json(const RateReport& report) {
  nlohmann::json j;
  j["metadata"] = report.metadata;
  j["summaries"] = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    j["summaries"].push_back({{"estimator", s.estimator},
                              {"loss", s.loss},
                              {"n", s.n},
                              {"m", s.m},
                              {"count", s.count},
                              {"failures", s.failures},
                              {"mean", s.mean},
                              {"median", s.median},
                              {"std_error", s.std_error}});
  }
  j["slopes"] = nlohmann::json::array();
  for (const auto& s : report.slopes) {
    nlohmann::json e{{"estimator", s.estimator}, {"loss", s.loss}, {"m", s.m}, {"defined", s.defined}};
    if (s.defined) {
      e["slope"] = s.fit.slope;
      e["std_error"] = s.fit.std_error;
    } else {
      e["note"] = s.note;
    }
    j["slopes"].push_back(e);
  }
  return j;
}

void write_losses_csv(const RateReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ExperimentError, "cannot write " + path);
  out << "estimator,loss,n,m,replicate,value\n";
  char buf[64];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.estimator << ',' << r.loss << ',' << r.n << ',' << r.m << ',' << r.replicate << ',' << buf << '\n';
  }
}

void write_report_json(const RateReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ExperimentError, "cannot write " + path);
  out << report_to_json(report).dump(2) << '\n';
}

}  // namespace lipshift
