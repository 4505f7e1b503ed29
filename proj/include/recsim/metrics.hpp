#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recsim/core.hpp"
#include "recsim/csv.hpp"
#include "recsim/errors.hpp"
#include "recsim/simulator.hpp"

namespace recsim {

/// Gini coefficient of a non-negative count vector:
///
///   G = sum_i sum_j |x_i - x_j| / (2 n sum x)
///
/// computed through the O(n log n) sorted form
///
///   G = sum_i (2i - n + 1) x_(i) / (n sum x),  x_(i) ascending, i from 0.
///
/// 0 is perfect equality; the maximum (n-1)/n is reached when exactly one
/// count is nonzero.
inline double gini(std::span<const double> counts) {
  if (counts.empty()) throw EmptyInput("gini");
  std::vector<double> xs(counts.begin(), counts.end());
  double total = 0.0;
  for (double x : xs) {
    if (x < 0.0) throw Error("gini input must be non-negative");
    total += x;
  }
  if (total <= 0.0) throw AllZero();
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    acc += (2.0 * static_cast<double>(i) - n + 1.0) * xs[i];
  return std::clamp(acc / (n * total), 0.0, 1.0);
}

/// Which items form the support of the inequality measurement: the whole
/// recommendable catalog (zero counts included, so starved items register) or
/// only items that have surfaced at least once.
enum class GiniSupport { FullCatalog, RecommendedOnly };

inline std::string_view to_string(GiniSupport s) {
  return s == GiniSupport::FullCatalog ? "full" : "recommended-only";
}

inline GiniSupport gini_support_from(std::string_view s) {
  if (s == "full") return GiniSupport::FullCatalog;
  if (s == "recommended-only") return GiniSupport::RecommendedOnly;
  throw ConfigError("unknown gini support: " + std::string(s));
}

struct GiniSeries {
  std::vector<std::pair<int, double>> checkpoints;  // (step, gini), steps increasing
  double final = 0.0;
};

/// Gini over cumulative per-item recommendation counts, checkpointed every
/// `interval` steps and at the final step. No-rating entries count toward the
/// item that surfaced; entries with no item (id 0) contribute nothing.
inline GiniSeries gini_series(const SimulationLog& log, int catalog_items,
                              const GaugeSet& gauge, int interval,
                              GiniSupport support = GiniSupport::FullCatalog) {
  if (log.entries.empty()) throw EmptyInput("gini_series log");
  if (interval < 1) throw ConfigError("gini interval must be >= 1");

  std::vector<ItemId> recommendable;
  for (int j = 0; j < catalog_items; ++j) {
    const ItemId id = static_cast<ItemId>(j + 1);
    if (!gauge.contains(id)) recommendable.push_back(id);
  }
  std::vector<double> counts(static_cast<std::size_t>(catalog_items) + 1, 0.0);

  auto checkpoint_value = [&]() {
    std::vector<double> support_counts;
    support_counts.reserve(recommendable.size());
    double total = 0.0;
    for (ItemId id : recommendable) {
      if (support == GiniSupport::RecommendedOnly && counts[id] == 0.0) continue;
      support_counts.push_back(counts[id]);
      total += counts[id];
    }
    // A checkpoint before anything surfaced (every entry failed) has no mass
    // to measure; call that perfect equality rather than erroring mid-series.
    if (support_counts.empty() || total == 0.0) return 0.0;
    return gini(support_counts);
  };

  GiniSeries series;
  const int last_step = log.entries.back().step;
  for (const LogEntry& e : log.entries) {
    if (e.item_id >= 1 && e.item_id <= catalog_items) counts[e.item_id] += 1.0;
    if (e.step % interval == 0 || e.step == last_step)
      series.checkpoints.emplace_back(e.step, checkpoint_value());
  }
  series.final = series.checkpoints.back().second;
  return series;
}

/// Per-item event counts plus a rank-ordered view (descending count, then
/// ascending item id).
struct PopularityHistogram {
  std::vector<long long> counts;  // indexed by item id - 1
  std::vector<std::pair<ItemId, long long>> ranked;

  long long total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
  }
};

namespace detail {
inline void build_ranked_view(PopularityHistogram& h) {
  h.ranked.clear();
  h.ranked.reserve(h.counts.size());
  for (std::size_t j = 0; j < h.counts.size(); ++j)
    h.ranked.emplace_back(static_cast<ItemId>(j + 1), h.counts[j]);
  std::sort(h.ranked.begin(), h.ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
}
}  // namespace detail

/// How often each item was recommended over a simulation run.
inline PopularityHistogram histogram_from_log(const SimulationLog& log, int catalog_items) {
  if (log.entries.empty()) throw EmptyInput("histogram log");
  PopularityHistogram h;
  h.counts.assign(catalog_items, 0);
  for (const LogEntry& e : log.entries)
    if (e.item_id >= 1 && e.item_id <= catalog_items) ++h.counts[e.item_id - 1];
  detail::build_ranked_view(h);
  return h;
}

/// Raw-data popularity: each user's top_k_per_user highest-rated items (ties
/// broken by ascending item id) aggregated over all users.
inline PopularityHistogram histogram_from_matrix(const RatingMatrix& m,
                                                 int top_k_per_user = 5) {
  if (m.users() == 0) throw EmptyInput("histogram matrix");
  if (top_k_per_user < 1) throw ConfigError("top-k per user must be >= 1");
  PopularityHistogram h;
  h.counts.assign(m.items(), 0);
  std::vector<std::pair<double, ItemId>> rated;
  for (int u = 0; u < m.users(); ++u) {
    rated.clear();
    for (int j = 0; j < m.items(); ++j)
      if (m.has(u, j)) rated.emplace_back(m.at(u, j), m.item_id(j));
    std::sort(rated.begin(), rated.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const std::size_t take = std::min<std::size_t>(rated.size(), top_k_per_user);
    for (std::size_t i = 0; i < take; ++i) ++h.counts[rated[i].second - 1];
  }
  detail::build_ranked_view(h);
  return h;
}

struct RegressionResult {
  double slope = 0.0;      // mean-rating change per additional rating
  double intercept = 0.0;
  int n_items = 0;
  double standardized_beta = 0.0;  // slope in standard-deviation units
};

/// Ordinary least squares of item mean rating against item rating count,
/// over items with at least one rating. A slope near zero is the "popularity
/// does not imply quality" signature of the raw data.
inline RegressionResult count_mean_regression(const RatingMatrix& m) {
  std::vector<double> counts, means;
  for (int j = 0; j < m.items(); ++j) {
    double sum = 0.0;
    int count = 0;
    for (int u = 0; u < m.users(); ++u)
      if (m.has(u, j)) {
        sum += m.at(u, j);
        ++count;
      }
    if (count > 0) {
      counts.push_back(static_cast<double>(count));
      means.push_back(sum / count);
    }
  }
  if (counts.size() < 2) throw EmptyInput("regression needs >= 2 rated items");
  const double var_x = population_variance(counts);
  if (var_x == 0.0) throw DegenerateRegression();
  RegressionResult r;
  r.n_items = static_cast<int>(counts.size());
  r.slope = population_covariance(counts, means) / var_x;
  r.intercept = mean(std::span<const double>(means)) -
                r.slope * mean(std::span<const double>(counts));
  const double var_y = population_variance(means);
  r.standardized_beta = var_y > 0.0 ? r.slope * std::sqrt(var_x / var_y) : 0.0;
  return r;
}

inline void write_gini_csv(const GiniSeries& s, std::ostream& out) {
  out << "step,gini\n";
  for (const auto& [step, g] : s.checkpoints)
    out << step << ',' << format_double(g) << '\n';
}

inline GiniSeries read_gini_csv(std::istream& in) {
  GiniSeries s;
  std::string line;
  if (!std::getline(in, line)) throw DataError("gini csv: missing header");
  int row = 0;
  while (std::getline(in, line)) {
    const std::string_view sv = csv::trim(line);
    if (sv.empty()) continue;
    ++row;
    const auto fields = csv::split(sv, ',');
    if (fields.size() != 2) throw DataError("gini csv: bad row " + std::to_string(row));
    const int step = static_cast<int>(csv::require_number(fields[0], "gini csv", row, 0));
    s.checkpoints.emplace_back(step, csv::require_number(fields[1], "gini csv", row, 1));
  }
  if (!s.checkpoints.empty()) s.final = s.checkpoints.back().second;
  return s;
}

inline void write_histogram_csv(const PopularityHistogram& h, std::ostream& out) {
  out << "item_id,count,rank\n";
  std::vector<int> rank(h.counts.size() + 1, 0);
  for (std::size_t r = 0; r < h.ranked.size(); ++r) rank[h.ranked[r].first] = static_cast<int>(r + 1);
  for (std::size_t j = 0; j < h.counts.size(); ++j)
    out << (j + 1) << ',' << h.counts[j] << ',' << rank[j + 1] << '\n';
}

}  // namespace recsim
