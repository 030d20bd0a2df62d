// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lipshift/error.hpp"
#include "lipshift/harness.hpp"
#include "lipshift/rng.hpp"

using namespace lipshift;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "design": {"kind": "uniform"},
    "f0": {"kind": "sine", "amplitude": 0.14, "frequency": 1},
    "delta": 0.1,
    "n_grid": [64, 128, 256],
    "replicates": 4,
    "seed": 7,
    "estimators": ["lse", {"kind": "kernel", "bandwidth": "adaptive"}, "isotonic"],
    "losses": ["weighted_sup", "sup", "l2_q", "density_weighted_sup"]
  })");
}

ErrorCode config_code(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidInput;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(base_config());
  CHECK(c.n_grid == std::vector<long>{64, 128, 256});
  CHECK(c.estimators.size() == 3);
  CHECK(c.estimators[1].kind == EstimatorKind::Kernel);
  CHECK(c.estimators[1].adaptive_bandwidth);
  CHECK(c.losses.size() == 4);
  CHECK(c.eval_points == 201);
  CHECK(config_hash(c) == config_hash(parse_config(base_config())));

  auto bad = [](auto edit) {
    json j = base_config();
    edit(j);
    return config_code(j) == ErrorCode::ConfigError;
  };
  CHECK(bad([](json& j) { j["f0"]["amplitude"] = 0.2; }));
  CHECK(bad([](json& j) { j["f0"] = {{"kind", "triangle"}, {"slope", 0.95}}; }));
  CHECK(bad([](json& j) { j["n_grid"] = {256, 128}; }));
  CHECK(bad([](json& j) { j["n_grid"] = {1, 8}; }));
  CHECK(bad([](json& j) { j["replicates"] = 0; }));
  CHECK(bad([](json& j) { j["delta"] = 1.5; }));
  CHECK(bad([](json& j) { j["estimators"] = {"spline"}; }));
  CHECK(bad([](json& j) { j["losses"] = {"l1"}; }));
  CHECK(bad([](json& j) { j["estimators"] = {"transfer"}; }));
  CHECK(bad([](json& j) { j["design"] = {{"kind", "power"}}; }));
  CHECK(bad([](json& j) { j.erase("n_grid"); }));
}

TEST_CASE("regression functions") {
  F0Spec tri;
  tri.kind = F0Kind::Triangle;
  tri.center = 0.5;
  tri.slope = 0.5;
  CHECK(tri(0.5) == doctest::Approx(0.125));
  CHECK(tri(0.8) == 0.0);
  CHECK(tri.lipschitz_constant() == 0.5);
  F0Spec sine;
  sine.kind = F0Kind::Sine;
  sine.amplitude = 0.1;
  sine.frequency = 1.0;
  CHECK(sine.lipschitz_constant() == doctest::Approx(0.2 * M_PI));
  CHECK(sine(0.25) == doctest::Approx(0.1));
}

TEST_CASE("data generation") {
  json j = base_config();
  j["f0"] = {{"kind", "zero"}};
  const ExperimentConfig zero = parse_config(j);
  SUBCASE("zero signal leaves the noise draws") {
    const RegressionSample s = generate(zero, 50, 99);
    Rng rng(99);
    std::vector<double> x(50), eps(50);
    for (double& v : x) v = rng.uniform();
    for (double& v : eps) v = rng.normal();
    const RegressionSample expected(x, eps);
    CHECK(s.x() == expected.x());
    CHECK(s.y() == expected.y());
  }
  SUBCASE("noise is centred") {
    const ExperimentConfig c = parse_config(base_config());
    const RegressionSample s = generate(c, 100000, 5);
    double mean = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) mean += s.y()[i] - c.f0(s.x()[i]);
    CHECK(std::abs(mean / 1e5) <= 0.02);
  }
  SUBCASE("deterministic") { CHECK(generate(zero, 30, 4).y() == generate(zero, 30, 4).y()); }
  SUBCASE("replicate seeds") {
    CHECK(replicate_seed(7, 0) != replicate_seed(7, 1));
    CHECK(replicate_seed(7, 3) == replicate_seed(7, 3));
    CHECK(replicate_seed(7, 3) != replicate_seed(8, 3));
  }
}

TEST_CASE("log-log slope") {
  std::vector<std::pair<double, double>> exact, flat;
  for (double n : {100.0, 200.0, 400.0, 800.0}) {
    exact.emplace_back(n, 3.0 * std::pow(n, -1.0 / 3.0));
    flat.emplace_back(n, 2.5);
  }
  CHECK(std::abs(fit_loglog_slope(exact).slope + 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(fit_loglog_slope(flat).slope) <= 1e-12);

  Rng rng(21);
  int within = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 6; ++k) {
      const double n = 100.0 * std::pow(2.0, k);
      pts.emplace_back(n, std::pow(n, -2.0 / 3.0) * std::exp(0.1 * rng.normal()));
    }
    const SlopeFit f = fit_loglog_slope(pts);
    within += std::abs(f.slope + 2.0 / 3.0) <= 3.0 * f.std_error;
  }
  CHECK(within >= 190);

  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, 1.0}}), Error);
  CHECK_THROWS_AS(fit_loglog_slope({{1.0, 1.0}, {2.0, 0.0}, {3.0, 1.0}}), Error);
}

TEST_CASE("noiseless zero signal is recovered exactly") {
  json j = base_config();
  j["f0"] = {{"kind", "zero"}};
  j["noise_sd"] = 0.0;
  j["estimators"] = {"lse", "isotonic"};
  const RateReport r = run_rate_experiment(parse_config(j), 2);
  for (const auto& s : r.summaries) CHECK(s.mean == 0.0);
  for (const auto& s : r.slopes) {
    CHECK_FALSE(s.defined);
    CHECK_FALSE(s.note.empty());
  }
}

TEST_CASE("experiment output is deterministic and thread independent") {
  const ExperimentConfig c = parse_config(base_config());
  const RateReport a = run_rate_experiment(c, 1);
  const RateReport b = run_rate_experiment(c, 4);
  const auto dir = std::filesystem::temp_directory_path() / "lipshift_test_harness";
  std::filesystem::create_directories(dir);
  write_losses_csv(a, (dir / "a.csv").string());
  write_losses_csv(b, (dir / "b.csv").string());
  CHECK(slurp((dir / "a.csv").string()) == slurp((dir / "b.csv").string()));
  CHECK(slurp((dir / "a.csv").string()).rfind("estimator,loss,n,m,replicate,value\n", 0) == 0);
  write_report_json(a, (dir / "report.json").string());
  const json rep = json::parse(slurp((dir / "report.json").string()));
  CHECK(rep["metadata"]["seed"] == 7);
  CHECK(rep["metadata"]["per_n"].size() == 3);
  CHECK(rep["summaries"].size() == a.summaries.size());

  const LossSummary* s = a.find("lse", "sup", 128);
  REQUIRE(s != nullptr);
  CHECK(s->count == 4);
  CHECK(s->failures == 0);
  CHECK(s->median > 0.0);
  const SlopeSummary* sl = a.find_slope("lse", "weighted_sup");
  REQUIRE(sl != nullptr);
  CHECK(sl->defined);

  // Earlier replicates do not depend on the replicate count.
  json more = base_config();
  more["replicates"] = 6;
  const RateReport c6 = run_rate_experiment(parse_config(more), 3);
  for (const auto& rec : a.records) {
    bool found = false;
    for (const auto& other : c6.records) {
      if (other.estimator == rec.estimator && other.loss == rec.loss && other.n == rec.n &&
          other.replicate == rec.replicate) {
        CHECK(other.value == rec.value);
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("LSE sup-loss does not grow with n") {
  json j = base_config();
  j["n_grid"] = {128, 512, 2048};
  j["replicates"] = 20;
  j["estimators"] = {"lse"};
  j["losses"] = {"sup"};
  const RateReport r = run_rate_experiment(parse_config(j), 0);
  for (std::size_t i = 1; i < r.summaries.size(); ++i) {
    const auto& prev = r.summaries[i - 1];
    const auto& cur = r.summaries[i];
    CHECK(cur.mean <= prev.mean + 2.0 * std::hypot(prev.std_error, cur.std_error));
  }
}

TEST_CASE("transfer experiment rows") {
  json j = base_config();
  j["design"] = {{"kind", "power"}, {"alpha", 2.0}};
  j["target_design"] = {{"kind", "uniform"}};
  j["n_grid"] = {256};
  j["m_grid"] = {32, 64};
  j["replicates"] = 3;
  j["estimators"] = {"transfer"};
  j["losses"] = {"l2_q", "weighted_sup"};
  const RateReport r = run_rate_experiment(parse_config(j), 2);
  for (const char* name : {"transfer", "transfer_source", "transfer_target"}) {
    for (long m : {32L, 64L}) {
      const LossSummary* s = r.find(name, "l2_q", 256, m);
      REQUIRE(s != nullptr);
      CHECK(s->count == 3);
    }
  }
}
