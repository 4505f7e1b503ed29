#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "recsim/core.hpp"
#include "recsim/csv.hpp"
#include "recsim/errors.hpp"
#include "recsim/recommenders.hpp"

namespace recsim {

enum class TrainingMode { Static, Dynamic };

inline std::string_view to_string(TrainingMode m) {
  return m == TrainingMode::Static ? "static" : "dynamic";
}

inline TrainingMode training_mode_from(std::string_view s) {
  if (s == "static") return TrainingMode::Static;
  if (s == "dynamic") return TrainingMode::Dynamic;
  throw ConfigError("unknown mode: " + std::string(s));
}

struct SimulationConfig {
  TrainingMode mode = TrainingMode::Static;
  int retrain_interval = 100;  // dynamic only: merge pending users every k arrivals
  int gini_interval = 100;
  int fallback_depth = 3;  // dynamic only: how far down the ranking to look for a rating
  std::uint64_t seed = 0;

  void check() const {
    if (retrain_interval < 1) throw ConfigError("retrain interval must be >= 1");
    if (fallback_depth < 1) throw ConfigError("fallback depth must be >= 1");
    if (gini_interval < 1) throw ConfigError("gini interval must be >= 1");
  }
};

/// One row per served test user, in arrival order. item_id is 0 only when the
/// recommender produced nothing for that user (empty ranking or a per-user
/// error); otherwise a no-rating entry still records which item surfaced.
struct LogEntry {
  int step = 0;  // 1-based
  UserId user_id = 0;
  ItemId item_id = 0;
  bool rated = false;
  double rating = 0.0;
  bool retrain_after = false;
};

struct SimulationLog {
  std::vector<LogEntry> entries;
  std::vector<int> retrain_steps;
  int final_training_users = 0;  // snapshot size when the run ended
};

namespace detail {

struct ServeResult {
  ItemId item = 0;
  bool rated = false;
  double rating = 0.0;
};

// Ask the recommender for a ranking and pick the entry to log. `depth` = 1
// takes the top pick as-is; larger depths walk down looking for an item the
// user has actually rated (dynamic-mode fallback).
inline ServeResult serve_user(const RatingMatrix& test, int row, const UserProfile& profile,
                              const Recommender& rec, int depth, Rng& rng) {
  ServeResult out;
  RankedRecommendation ranking;
  try {
    ranking = rec.recommend(profile, depth, rng);
  } catch (const Error&) {
    return out;  // degrade to a no-rating entry, never abort the run
  }
  if (ranking.empty()) return out;
  out.item = ranking[0].item;
  for (std::size_t d = 0; d < ranking.size() && static_cast<int>(d) < depth; ++d) {
    const int col = test.col_of(ranking[d].item);
    if (test.has(row, col)) {
      out.item = ranking[d].item;
      out.rated = true;
      out.rating = test.at(row, col);
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Case 1, single training: fit once, then serve each arriving test user one
/// recommendation. A top pick the user never rated is logged as no-rating
/// with its item id; nothing is ever fed back into the model.
inline SimulationLog run_static(const RatingMatrix& train, const RatingMatrix& test,
                                const GaugeSet& gauge, Recommender& rec,
                                const SimulationConfig& config) {
  config.check();
  rec.fit(train, gauge);
  Rng rng(config.seed);
  SimulationLog log;
  log.entries.reserve(test.users());
  for (int i = 0; i < test.users(); ++i) {
    const UserProfile profile = profile_from_row(test, i, gauge);
    const auto r = detail::serve_user(test, i, profile, rec, 1, rng);
    log.entries.push_back({i + 1, profile.user_id, r.item, r.rated, r.rating, false});
  }
  log.final_training_users = train.users();
  return log;
}

/// Case 2, repeated training: as static, except a no-rating top pick falls
/// back to the next picks (up to fallback_depth), every served user's gauge
/// ratings plus the rating of the served item are buffered, and after every
/// retrain_interval arrivals the buffer is merged into the snapshot and the
/// model refit. A user's own row never participates in serving them: it joins
/// the snapshot only at the next retrain boundary after their step.
inline SimulationLog run_dynamic(const RatingMatrix& train, const RatingMatrix& test,
                                 const GaugeSet& gauge, Recommender& rec,
                                 const SimulationConfig& config) {
  config.check();
  rec.fit(train, gauge);
  Rng rng(config.seed);
  SimulationLog log;
  log.entries.reserve(test.users());
  RatingMatrix snapshot = train;
  std::vector<PartialRow> pending;
  for (int i = 0; i < test.users(); ++i) {
    const UserProfile profile = profile_from_row(test, i, gauge);
    const auto r = detail::serve_user(test, i, profile, rec, config.fallback_depth, rng);
    LogEntry entry{i + 1, profile.user_id, r.item, r.rated, r.rating, false};

    PartialRow row;
    row.user_id = profile.user_id;
    for (std::size_t g = 0; g < profile.items.size(); ++g)
      row.ratings.emplace_back(profile.items[g], profile.ratings[g]);
    if (r.rated) row.ratings.emplace_back(r.item, r.rating);
    pending.push_back(std::move(row));

    if ((i + 1) % config.retrain_interval == 0 && i + 1 < test.users()) {
      snapshot = snapshot.with_appended_rows(pending);
      pending.clear();
      rec.fit(snapshot, gauge);
      entry.retrain_after = true;
      log.retrain_steps.push_back(entry.step);
    }
    log.entries.push_back(entry);
  }
  log.final_training_users = snapshot.users();
  return log;
}

inline SimulationLog run_simulation(const RatingMatrix& train, const RatingMatrix& test,
                                    const GaugeSet& gauge, Recommender& rec,
                                    const SimulationConfig& config) {
  return config.mode == TrainingMode::Static ? run_static(train, test, gauge, rec, config)
                                             : run_dynamic(train, test, gauge, rec, config);
}

inline void write_log_csv(const SimulationLog& log, std::ostream& out) {
  out << "step,user_id,item_id,outcome,rating,retrain_flag\n";
  for (const LogEntry& e : log.entries) {
    out << e.step << ',' << e.user_id << ',' << e.item_id << ','
        << (e.rated ? "rated" : "no_rating") << ','
        << (e.rated ? format_double(e.rating) : std::string()) << ','
        << (e.retrain_after ? 1 : 0) << '\n';
  }
}

inline SimulationLog read_log_csv(std::istream& in) {
  SimulationLog log;
  std::string line;
  if (!std::getline(in, line)) throw DataError("log csv: missing header");
  int row = 0;
  while (std::getline(in, line)) {
    const std::string_view sv = csv::trim(line);
    if (sv.empty()) continue;
    ++row;
    const auto fields = csv::split(sv, ',');
    if (fields.size() != 6)
      throw DataError("log csv: row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected 6");
    LogEntry e;
    e.step = static_cast<int>(csv::require_number(fields[0], "log csv", row, 0));
    e.user_id = static_cast<UserId>(csv::require_number(fields[1], "log csv", row, 1));
    e.item_id = static_cast<ItemId>(csv::require_number(fields[2], "log csv", row, 2));
    if (fields[3] == "rated")
      e.rated = true;
    else if (fields[3] == "no_rating")
      e.rated = false;
    else
      throw DataError("log csv: bad outcome at row " + std::to_string(row));
    if (e.rated) e.rating = csv::require_number(fields[4], "log csv", row, 4);
    e.retrain_after = csv::require_number(fields[5], "log csv", row, 5) != 0.0;
    if (e.retrain_after) log.retrain_steps.push_back(e.step);
    log.entries.push_back(e);
  }
  return log;
}

}  // namespace recsim
