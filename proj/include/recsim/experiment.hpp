#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "recsim/core.hpp"
#include "recsim/ingest.hpp"
#include "recsim/metrics.hpp"
#include "recsim/recommenders.hpp"
#include "recsim/simulator.hpp"

namespace recsim {

struct ExperimentSpec {
  DatasetConfig dataset;
  std::vector<std::string> methods = known_methods();
  std::vector<TrainingMode> modes = {TrainingMode::Static, TrainingMode::Dynamic};
  int trials = 5;
  int retrain_interval = 100;
  int gini_interval = 100;
  int fallback_depth = 3;
  int mf_rank = 15;
  GiniSupport gini_support = GiniSupport::FullCatalog;
  std::optional<std::vector<ItemId>> gauge_override;
  int jobs = 1;
  std::string out_dir;

  void check() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (methods.empty()) throw ConfigError("methods list is empty");
    if (modes.empty()) throw ConfigError("modes list is empty");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (mf_rank < 1) throw ConfigError("mf rank must be >= 1");
    if (out_dir.empty()) throw ConfigError("output directory is required");
    for (const std::string& m : methods)
      if (std::find(known_methods().begin(), known_methods().end(), m) ==
          known_methods().end())
        throw ConfigError("unknown method: " + m);
  }
};

struct RunResult {
  std::string method;
  TrainingMode mode = TrainingMode::Static;
  int trial = 0;  // 1-based
  GiniSeries series;
  PopularityHistogram histogram;
  std::uint64_t pearson_fallbacks = 0;
};

struct MethodModeSummary {
  std::string method;
  TrainingMode mode = TrainingMode::Static;
  double median_final_gini = 0.0;
  std::vector<double> final_gini_per_trial;
  GiniSeries median_series;
};

struct ExperimentSummary {
  std::vector<MethodModeSummary> cells;  // spec order: methods outer, modes inner
  int filtered_users = 0;
  std::vector<ItemId> gauge_items;

  const MethodModeSummary& cell(std::string_view method, TrainingMode mode) const {
    for (const auto& c : cells)
      if (c.method == method && c.mode == mode) return c;
    throw Error("no summary cell for " + std::string(method));
  }
};

namespace detail {

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n == 0) throw EmptyInput("median");
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

// Per-trial split seed depends on the trial alone, so every method and mode
// of a trial sees the same train/test partition. Run seeds add the method and
// mode, re-randomizing the stochastic methods per trial.
inline std::uint64_t split_seed(std::uint64_t seed, int trial) {
  return mix_seed(seed, {1, static_cast<std::uint64_t>(trial)});
}
inline std::uint64_t run_seed(std::uint64_t seed, int trial, std::string_view method,
                              TrainingMode mode) {
  return mix_seed(seed, {2, static_cast<std::uint64_t>(trial), fnv1a(method),
                         fnv1a(to_string(mode))});
}

inline GiniSeries pointwise_median_series(const std::vector<const GiniSeries*>& series) {
  GiniSeries out;
  if (series.empty()) return out;
  const std::size_t points = series.front()->checkpoints.size();
  for (const GiniSeries* s : series)
    if (s->checkpoints.size() != points)
      throw Error("trial gini series have different checkpoint counts");
  for (std::size_t i = 0; i < points; ++i) {
    std::vector<double> vals;
    vals.reserve(series.size());
    for (const GiniSeries* s : series) vals.push_back(s->checkpoints[i].second);
    out.checkpoints.emplace_back(series.front()->checkpoints[i].first, median(vals));
  }
  out.final = out.checkpoints.back().second;
  return out;
}

}  // namespace detail

/// One (method, mode, trial) simulation against a pre-filtered matrix.
/// Splits with the trial seed, runs, and returns the gini series plus the
/// per-item recommendation histogram.
inline RunResult run_single(const RatingMatrix& filtered, const GaugeSet& gauge,
                            const ExperimentSpec& spec, const std::string& method,
                            TrainingMode mode, int trial) {
  Rng split_rng(detail::split_seed(spec.dataset.seed, trial));
  auto [train, test] = split_users(filtered, spec.dataset, split_rng);
  auto ground_truth = std::make_shared<const RatingMatrix>(std::move(test));

  MethodParams params;
  params.mf_rank = spec.mf_rank;
  std::unique_ptr<Recommender> rec = make_recommender(method, params, ground_truth);

  SimulationConfig sim;
  sim.mode = mode;
  sim.retrain_interval = spec.retrain_interval;
  sim.gini_interval = spec.gini_interval;
  sim.fallback_depth = spec.fallback_depth;
  sim.seed = detail::run_seed(spec.dataset.seed, trial, method, mode);

  const SimulationLog log = run_simulation(train, *ground_truth, gauge, *rec, sim);

  RunResult result;
  result.method = method;
  result.mode = mode;
  result.trial = trial;
  result.series = gini_series(log, filtered.items(), gauge, spec.gini_interval,
                              spec.gini_support);
  result.histogram = histogram_from_log(log, filtered.items());
  if (const auto* p = dynamic_cast<const PearsonRecommender*>(rec.get()))
    result.pearson_fallbacks = p->fallback_count();

  if (!spec.out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(spec.out_dir) /
                         (method + "_" + std::string(to_string(mode))) /
                         ("trial" + std::to_string(trial));
    std::ofstream log_out(dir / "log.csv");
    if (!log_out) throw Error("cannot write " + (dir / "log.csv").string());
    write_log_csv(log, log_out);
    std::ofstream gini_out(dir / "gini.csv");
    if (!gini_out) throw Error("cannot write " + (dir / "gini.csv").string());
    write_gini_csv(result.series, gini_out);
  }
  return result;
}

/// Resolve the gauge set: the configured override (validated for full
/// coverage) or derivation from the filtered matrix.
inline GaugeSet resolve_gauge(const RatingMatrix& filtered,
                              const std::optional<std::vector<ItemId>>& override_ids) {
  if (!override_ids) return derive_gauge_set(filtered);
  GaugeSet gauge(*override_ids);
  for (ItemId id : gauge.ids()) {
    if (id < 1 || id > filtered.items())
      throw ConfigError("gauge item " + std::to_string(id) + " outside catalog");
    for (int u = 0; u < filtered.users(); ++u)
      if (!filtered.has(u, filtered.col_of(id)))
        throw DataError("gauge override item " + std::to_string(id) +
                        " is not rated by every filtered user");
  }
  return gauge;
}

inline nlohmann::ordered_json summary_to_json(const ExperimentSpec& spec,
                                              const ExperimentSummary& summary) {
  nlohmann::ordered_json j;
  j["config"] = {
      {"dataset", spec.dataset.path},
      {"min_rated_fraction", spec.dataset.min_rated_fraction},
      {"train_size", spec.dataset.train_size},
      {"test_size", spec.dataset.test_size},
      {"seed", spec.dataset.seed},
      {"methods", spec.methods},
      {"modes", [&] {
         std::vector<std::string> ms;
         for (TrainingMode m : spec.modes) ms.emplace_back(to_string(m));
         return ms;
       }()},
      {"trials", spec.trials},
      {"retrain_interval", spec.retrain_interval},
      {"gini_interval", spec.gini_interval},
      {"fallback_depth", spec.fallback_depth},
      {"mf_rank", spec.mf_rank},
      {"gini_support", std::string(to_string(spec.gini_support))},
      {"filtered_users", summary.filtered_users},
      {"gauge_items", summary.gauge_items},
  };
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  for (const std::string& method : spec.methods) {
    nlohmann::ordered_json per_mode = nlohmann::ordered_json::object();
    for (TrainingMode mode : spec.modes) {
      const MethodModeSummary& c = summary.cell(method, mode);
      nlohmann::ordered_json cell;
      cell["median_final_gini"] = c.median_final_gini;
      cell["final_gini_per_trial"] = c.final_gini_per_trial;
      nlohmann::ordered_json series;
      std::vector<int> steps;
      std::vector<double> ginis;
      for (const auto& [step, g] : c.median_series.checkpoints) {
        steps.push_back(step);
        ginis.push_back(g);
      }
      series["steps"] = steps;
      series["gini"] = ginis;
      cell["median_series"] = series;
      per_mode[std::string(to_string(mode))] = cell;
    }
    results[method] = per_mode;
  }
  j["results"] = results;
  return j;
}

/// Run the full experiment grid against an already-loaded raw matrix:
/// filter, resolve the gauge, then one simulation per (method, mode, trial),
/// optionally in parallel. Artifacts land under spec.out_dir:
///
///   <out>/<method>_<mode>/trial<t>/{log.csv, gini.csv}
///   <out>/distributions/<method>_<mode>.csv   (counts summed over trials)
///   <out>/distributions/raw_top5.csv          (top-5-per-user, raw data)
///   <out>/summary.json
inline ExperimentSummary run_experiment_on(const RatingMatrix& raw,
                                           const ExperimentSpec& spec) {
  spec.check();
  const RatingMatrix filtered = filter_users(raw, spec.dataset.min_rated_fraction);
  if (spec.dataset.train_size + spec.dataset.test_size > filtered.users())
    throw NotEnoughUsers(filtered.users(), spec.dataset.train_size + spec.dataset.test_size);
  const GaugeSet gauge = resolve_gauge(filtered, spec.gauge_override);
  if (std::find(spec.methods.begin(), spec.methods.end(), "mf") != spec.methods.end() &&
      spec.mf_rank > std::min(spec.dataset.train_size, filtered.items()))
    throw ConfigError("mf rank exceeds the training snapshot dimensions");

  namespace fs = std::filesystem;
  struct Task {
    std::string method;
    TrainingMode mode;
    int trial;
  };
  std::vector<Task> tasks;
  for (const std::string& method : spec.methods)
    for (TrainingMode mode : spec.modes)
      for (int t = 1; t <= spec.trials; ++t) tasks.push_back({method, mode, t});

  if (!spec.out_dir.empty()) {
    for (const Task& t : tasks)
      fs::create_directories(fs::path(spec.out_dir) /
                             (t.method + "_" + std::string(to_string(t.mode))) /
                             ("trial" + std::to_string(t.trial)));
    fs::create_directories(fs::path(spec.out_dir) / "distributions");
  }

  std::vector<RunResult> results(tasks.size());
  std::vector<std::exception_ptr> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      try {
        results[i] = run_single(filtered, gauge, spec, t.method, t.mode, t.trial);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::min<int>(spec.jobs, static_cast<int>(tasks.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      throw Error("method=" + tasks[i].method + " mode=" +
                  std::string(to_string(tasks[i].mode)) + " trial=" +
                  std::to_string(tasks[i].trial) + ": " + e.what());
    }
  }

  ExperimentSummary summary;
  summary.filtered_users = filtered.users();
  summary.gauge_items = gauge.ids();
  for (const std::string& method : spec.methods) {
    for (TrainingMode mode : spec.modes) {
      MethodModeSummary cell;
      cell.method = method;
      cell.mode = mode;
      std::vector<const GiniSeries*> series;
      PopularityHistogram combined;
      combined.counts.assign(filtered.items(), 0);
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].method != method || tasks[i].mode != mode) continue;
        cell.final_gini_per_trial.push_back(results[i].series.final);
        series.push_back(&results[i].series);
        for (std::size_t j = 0; j < combined.counts.size(); ++j)
          combined.counts[j] += results[i].histogram.counts[j];
      }
      cell.median_final_gini = detail::median(cell.final_gini_per_trial);
      cell.median_series = detail::pointwise_median_series(series);
      if (!spec.out_dir.empty()) {
        detail::build_ranked_view(combined);
        const fs::path path = fs::path(spec.out_dir) / "distributions" /
                              (method + "_" + std::string(to_string(mode)) + ".csv");
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        write_histogram_csv(combined, out);
      }
      summary.cells.push_back(std::move(cell));
    }
  }

  if (!spec.out_dir.empty()) {
    {
      const fs::path path = fs::path(spec.out_dir) / "distributions" / "raw_top5.csv";
      std::ofstream out(path);
      if (!out) throw Error("cannot write " + path.string());
      write_histogram_csv(histogram_from_matrix(raw, 5), out);
    }
    const fs::path path = fs::path(spec.out_dir) / "summary.json";
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << summary_to_json(spec, summary).dump(2) << '\n';
  }
  return summary;
}

inline ExperimentSummary run_experiment(const ExperimentSpec& spec) {
  if (spec.dataset.path.empty()) throw ConfigError("dataset path is required");
  return run_experiment_on(load_jester_csv(spec.dataset.path), spec);
}

/// Synthetic Jester-shaped data for tests and CI: a fully-rated gauge block
/// (items 1..gauge_size), everything else present with probability `density`.
/// The long-tail model gives items a steeply decaying quality curve (assigned
/// through a seeded permutation) so a few items dominate top-5 lists the way
/// the real catalog's head does; the uniform model draws every rating
/// uniformly from [-10, 10]. Ratings are quantized to 2 decimals.
inline RatingMatrix generate_synthetic(int users, int items, int gauge_size,
                                       std::string_view rating_model, double density,
                                       std::uint64_t seed) {
  if (users < 1 || items < 1) throw ConfigError("synthetic matrix needs users and items >= 1");
  if (gauge_size < 1 || gauge_size > items)
    throw ConfigError("gauge size must be in [1, items]");
  if (density < 0.0 || density > 1.0) throw ConfigError("density must be in [0, 1]");
  const bool long_tail = rating_model == "long-tail";
  if (!long_tail && rating_model != "uniform")
    throw ConfigError("unknown rating model: " + std::string(rating_model));

  Rng rng(mix_seed(seed, {0x5e7a}));
  std::vector<double> quality(items, 0.0);
  if (long_tail) {
    std::vector<int> ranks(items);
    for (int j = 0; j < items; ++j) ranks[j] = j + 1;
    rng.shuffle(ranks);
    for (int j = 0; j < items; ++j)
      quality[j] = -2.0 + 9.0 / std::pow(static_cast<double>(ranks[j]), 0.7);
  }

  auto quantize = [](double v) {
    v = std::clamp(v, rating::kMin, rating::kMax);
    return std::round(v * 100.0) / 100.0;
  };

  std::vector<double> values(static_cast<std::size_t>(users) * items, 0.0);
  std::vector<std::uint8_t> present(static_cast<std::size_t>(users) * items, 0);
  std::vector<UserId> ids(users);
  for (int u = 0; u < users; ++u) {
    ids[u] = u + 1;
    for (int j = 0; j < items; ++j) {
      const bool in_gauge_block = j < gauge_size;
      if (!in_gauge_block && rng.unit() >= density) continue;
      const double v = long_tail ? quality[j] + rng.normal(0.0, 3.0)
                                 : rng.uniform(rating::kMin, rating::kMax);
      values[static_cast<std::size_t>(u) * items + j] = quantize(v);
      present[static_cast<std::size_t>(u) * items + j] = 1;
    }
  }
  return RatingMatrix::from_parts(items, std::move(values), std::move(present),
                                  std::move(ids));
}

}  // namespace recsim
