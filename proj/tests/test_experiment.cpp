#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "recsim/experiment.hpp"

using namespace recsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentSpec small_spec(const std::string& out_dir, std::uint64_t seed = 42) {
  ExperimentSpec spec;
  spec.dataset.min_rated_fraction = 0.5;
  spec.dataset.train_size = 60;
  spec.dataset.test_size = 200;
  spec.dataset.seed = seed;
  spec.trials = 2;
  spec.retrain_interval = 50;
  spec.gini_interval = 50;
  spec.mf_rank = 5;
  spec.out_dir = out_dir;
  return spec;
}

struct TempDir {
  explicit TempDir(const std::string& name) : path(fs::path("exp_test_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path.parent_path()); }
  fs::path path;
};

}  // namespace

TEST_CASE("synthetic generator: density 1 fills every cell, seeds reproduce") {
  const RatingMatrix full = generate_synthetic(12, 9, 3, "uniform", 1.0, 5);
  for (int u = 0; u < full.users(); ++u) CHECK(full.rated_count(u) == 9);
  const RatingMatrix a = generate_synthetic(20, 10, 4, "long-tail", 0.7, 99);
  const RatingMatrix b = generate_synthetic(20, 10, 4, "long-tail", 0.7, 99);
  const RatingMatrix c = generate_synthetic(20, 10, 4, "long-tail", 0.7, 100);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("synthetic generator: the gauge block is fully rated and bounds hold") {
  const RatingMatrix m = generate_synthetic(50, 15, 6, "long-tail", 0.4, 7);
  const GaugeSet g = derive_gauge_set(m, 6);
  CHECK(g.ids() == std::vector<ItemId>{1, 2, 3, 4, 5, 6});
  for (int u = 0; u < m.users(); ++u)
    for (int j = 0; j < m.items(); ++j)
      if (m.has(u, j)) {
        CHECK(m.at(u, j) >= -10.0);
        CHECK(m.at(u, j) <= 10.0);
        // 2-decimal quantization
        const double scaled = m.at(u, j) * 100.0;
        CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
      }
}

TEST_CASE("synthetic long-tail data has a pronounced head") {
  const RatingMatrix m = generate_synthetic(600, 30, 10, "long-tail", 0.75, 2024);
  const PopularityHistogram h = histogram_from_matrix(m, 5);
  double head = 0.0;
  for (int i = 0; i < 5; ++i) head += double(h.ranked[i].second) / 5.0;
  double tail = 0.0;
  const std::size_t half = h.ranked.size() / 2;
  for (std::size_t i = half; i < h.ranked.size(); ++i) tail += double(h.ranked[i].second);
  tail /= double(h.ranked.size() - half);
  CHECK(head > 3.0 * std::max(tail, 1.0));
  for (std::size_t i = 1; i < h.ranked.size(); ++i)
    CHECK(h.ranked[i].second <= h.ranked[i - 1].second);
}

TEST_CASE("synthetic matrices round-trip through the jester writer") {
  const RatingMatrix m = generate_synthetic(25, 8, 3, "uniform", 0.6, 77);
  std::stringstream ss;
  write_jester_csv(m, ss);
  CHECK(parse_jester(ss, "synthetic").content_hash() == m.content_hash());
}

TEST_CASE("median is the middle order statistic") {
  CHECK(detail::median({5, 1, 4, 2, 3}) == 3.0);
  CHECK(detail::median({4, 1, 3, 2}) == 2.5);
  CHECK(detail::median({7}) == 7.0);
}

TEST_CASE("a single-cell experiment writes the expected artifacts") {
  TempDir tmp("single");
  const RatingMatrix raw = generate_synthetic(300, 20, 10, "long-tail", 0.8, 11);
  ExperimentSpec spec = small_spec((tmp.path / "out").string(), 7);
  spec.methods = {"optimal"};
  spec.modes = {TrainingMode::Static};
  spec.trials = 1;
  const ExperimentSummary summary = run_experiment_on(raw, spec);
  REQUIRE(summary.cells.size() == 1);
  CHECK(summary.cells[0].final_gini_per_trial.size() == 1);
  CHECK(fs::exists(tmp.path / "out" / "optimal_static" / "trial1" / "log.csv"));
  CHECK(fs::exists(tmp.path / "out" / "optimal_static" / "trial1" / "gini.csv"));
  CHECK(fs::exists(tmp.path / "out" / "distributions" / "optimal_static.csv"));
  CHECK(fs::exists(tmp.path / "out" / "distributions" / "raw_top5.csv"));
  const auto j = nlohmann::json::parse(slurp(tmp.path / "out" / "summary.json"));
  CHECK(j["results"]["optimal"]["static"]["median_final_gini"].is_number());
  CHECK(j["config"]["gauge_items"].size() == 10);

  // the emitted per-trial files re-parse through the project loaders
  std::ifstream log_in(tmp.path / "out" / "optimal_static" / "trial1" / "log.csv");
  const SimulationLog log = read_log_csv(log_in);
  CHECK(log.entries.size() == 200);
  std::ifstream gini_in(tmp.path / "out" / "optimal_static" / "trial1" / "gini.csv");
  const GiniSeries series = read_gini_csv(gini_in);
  CHECK(series.final == summary.cells[0].final_gini_per_trial[0]);
}

TEST_CASE("summary json has the same schema for every method") {
  TempDir tmp("schema");
  const RatingMatrix raw = generate_synthetic(250, 16, 8, "long-tail", 0.85, 13);
  ExperimentSpec spec = small_spec((tmp.path / "out").string(), 3);
  spec.dataset.train_size = 40;
  spec.dataset.test_size = 120;
  spec.trials = 1;
  spec.mf_rank = 4;
  spec.gauge_override = std::vector<ItemId>{1, 2, 3, 4, 5, 6, 7, 8};
  run_experiment_on(raw, spec);
  const auto j = nlohmann::json::parse(slurp(tmp.path / "out" / "summary.json"));
  REQUIRE(j["results"].size() == known_methods().size());
  std::vector<std::string> reference_keys;
  for (const auto& [method, cell] : j["results"].items()) {
    for (const auto& [mode, payload] : cell.items()) {
      std::vector<std::string> keys;
      for (const auto& [k, v] : payload.items()) keys.push_back(k);
      if (reference_keys.empty())
        reference_keys = keys;
      else
        CHECK(keys == reference_keys);
    }
  }
}

TEST_CASE("experiments are byte-identical across reruns and job counts") {
  const RatingMatrix raw = generate_synthetic(300, 18, 8, "long-tail", 0.8, 21);
  TempDir tmp("determinism");
  ExperimentSpec spec = small_spec((tmp.path / "a").string(), 1001);
  spec.dataset.train_size = 50;
  spec.dataset.test_size = 150;
  spec.mf_rank = 4;
  spec.gauge_override = std::vector<ItemId>{1, 2, 3, 4, 5, 6, 7, 8};
  run_experiment_on(raw, spec);
  spec.out_dir = (tmp.path / "b").string();
  run_experiment_on(raw, spec);
  spec.out_dir = (tmp.path / "c").string();
  spec.jobs = 2;
  run_experiment_on(raw, spec);

  CHECK(slurp(tmp.path / "a" / "summary.json") == slurp(tmp.path / "b" / "summary.json"));
  CHECK(slurp(tmp.path / "a" / "summary.json") == slurp(tmp.path / "c" / "summary.json"));
  for (const std::string cell : {"random_static", "pearson_dynamic", "mf_dynamic"}) {
    const std::string rel = cell + "/trial2/log.csv";
    CHECK(slurp(tmp.path / "a" / rel) == slurp(tmp.path / "b" / rel));
    CHECK(slurp(tmp.path / "a" / rel) == slurp(tmp.path / "c" / rel));
  }
}

TEST_CASE("adding trials never perturbs earlier ones") {
  const RatingMatrix raw = generate_synthetic(250, 14, 6, "long-tail", 0.85, 31);
  TempDir tmp("trials");
  ExperimentSpec spec = small_spec((tmp.path / "one").string(), 8);
  spec.dataset.train_size = 40;
  spec.dataset.test_size = 100;
  spec.methods = {"pop2", "pearson"};
  spec.trials = 1;
  spec.mf_rank = 4;
  spec.gauge_override = std::vector<ItemId>{1, 2, 3, 4, 5, 6};
  run_experiment_on(raw, spec);
  spec.out_dir = (tmp.path / "two").string();
  spec.trials = 2;
  run_experiment_on(raw, spec);
  for (const std::string cell : {"pop2_static", "pop2_dynamic", "pearson_static"}) {
    const std::string rel = cell + "/trial1/log.csv";
    CHECK(slurp(tmp.path / "one" / rel) == slurp(tmp.path / "two" / rel));
  }
}

TEST_CASE("experiment validation fails before any trial") {
  const RatingMatrix raw = generate_synthetic(100, 12, 4, "uniform", 0.9, 41);
  ExperimentSpec spec = small_spec("unused_out");
  spec.methods = {"nope"};
  CHECK_THROWS_AS(run_experiment_on(raw, spec), ConfigError);
  spec = small_spec("unused_out");
  spec.dataset.train_size = 90;
  spec.dataset.test_size = 90;
  CHECK_THROWS_AS(run_experiment_on(raw, spec), NotEnoughUsers);
  spec = small_spec("unused_out");
  spec.trials = 0;
  CHECK_THROWS_AS(run_experiment_on(raw, spec), ConfigError);
  spec = small_spec("unused_out");
  spec.dataset.train_size = 30;
  spec.dataset.test_size = 40;
  spec.gauge_override = std::vector<ItemId>{1, 2, 3, 4};
  spec.mf_rank = 500;
  CHECK_THROWS_AS(run_experiment_on(raw, spec), ConfigError);
}

TEST_CASE("gauge overrides are validated for full coverage") {
  const RatingMatrix raw = generate_synthetic(120, 12, 4, "uniform", 0.6, 51);
  const RatingMatrix filtered = filter_users(raw, 0.5);
  CHECK(resolve_gauge(filtered, std::vector<ItemId>{1, 2, 3, 4}).ids() ==
        std::vector<ItemId>{1, 2, 3, 4});
  CHECK_THROWS_AS(resolve_gauge(filtered, std::vector<ItemId>{1, 2, 3, 11}), DataError);
  CHECK_THROWS_AS(resolve_gauge(filtered, std::vector<ItemId>{1, 2, 3, 44}), ConfigError);
}
