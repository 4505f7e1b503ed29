#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <utility>
#include <vector>

#include "recsim/errors.hpp"
#include "recsim/rng.hpp"

namespace recsim {

using UserId = std::int32_t;  // 1-based original row number of the source file
using ItemId = std::int32_t;  // 1-based column number (joke id)

namespace rating {

inline constexpr double kMin = -10.0;
inline constexpr double kMax = 10.0;
// File-format artifact of the Jester distribution: 99 marks an unrated cell.
// It never survives past parsing; missingness is a cell state, not a value.
inline constexpr double kMissingSentinel = 99.0;

inline bool in_bounds(double v) { return std::isfinite(v) && v >= kMin && v <= kMax; }

}  // namespace rating

/// One rating per appended cell: used when merging served test users back
/// into a training snapshot during dynamic runs.
struct PartialRow {
  UserId user_id = 0;
  std::vector<std::pair<ItemId, double>> ratings;
};

/// Dense user x item matrix with explicit per-cell presence. Immutable after
/// construction; derived snapshots (row selection, appended rows) are new
/// matrices, so concurrent readers never see mutation.
class RatingMatrix {
 public:
  RatingMatrix() = default;

  /// validate_matrix: turn a raw rectangular grid into a matrix. Cells equal
  /// to the sentinel 99 become missing; everything else must lie in [-10, 10].
  static RatingMatrix validate(const std::vector<std::vector<double>>& raw) {
    RatingMatrix m;
    if (raw.empty()) {
      m.items_ = 0;
      return m;
    }
    m.items_ = static_cast<int>(raw[0].size());
    const int users = static_cast<int>(raw.size());
    m.values_.assign(static_cast<std::size_t>(users) * m.items_, 0.0);
    m.present_.assign(static_cast<std::size_t>(users) * m.items_, 0);
    m.rated_count_.assign(users, 0);
    m.user_ids_.resize(users);
    for (int u = 0; u < users; ++u) {
      m.user_ids_[u] = u + 1;
      if (static_cast<int>(raw[u].size()) != m.items_)
        throw RaggedGrid(u, static_cast<std::size_t>(m.items_), raw[u].size());
      for (int j = 0; j < m.items_; ++j) {
        const double v = raw[u][j];
        if (v == rating::kMissingSentinel) continue;
        if (!rating::in_bounds(v)) throw OutOfRangeRating(u, j, v);
        m.values_[m.index(u, j)] = v;
        m.present_[m.index(u, j)] = 1;
        ++m.rated_count_[u];
      }
    }
    return m;
  }

  /// Build from pre-validated parallel arrays. `values`/`present` are row-major
  /// users x items; caller guarantees bounds have been checked.
  static RatingMatrix from_parts(int items, std::vector<double> values,
                                 std::vector<std::uint8_t> present,
                                 std::vector<UserId> user_ids) {
    RatingMatrix m;
    m.items_ = items;
    m.values_ = std::move(values);
    m.present_ = std::move(present);
    m.user_ids_ = std::move(user_ids);
    const int users = static_cast<int>(m.user_ids_.size());
    m.rated_count_.assign(users, 0);
    for (int u = 0; u < users; ++u)
      for (int j = 0; j < items; ++j)
        if (m.present_[m.index(u, j)]) ++m.rated_count_[u];
    return m;
  }

  int users() const { return static_cast<int>(user_ids_.size()); }
  int items() const { return items_; }

  bool has(int u, int j) const { return present_[index(u, j)] != 0; }
  double at(int u, int j) const { return values_[index(u, j)]; }
  int rated_count(int u) const { return rated_count_[u]; }
  UserId user_id(int u) const { return user_ids_[u]; }
  const std::vector<UserId>& user_ids() const { return user_ids_; }

  ItemId item_id(int j) const { return static_cast<ItemId>(j + 1); }
  int col_of(ItemId id) const { return static_cast<int>(id) - 1; }

  /// Mean of the present ratings in row u; 0 for an all-missing row.
  double row_mean(int u) const {
    if (rated_count_[u] == 0) return 0.0;
    double s = 0.0;
    for (int j = 0; j < items_; ++j)
      if (has(u, j)) s += at(u, j);
    return s / rated_count_[u];
  }

  /// New matrix holding the given rows, in the given order. User ids travel
  /// with their rows.
  RatingMatrix select_rows(const std::vector<int>& rows) const {
    RatingMatrix m;
    m.items_ = items_;
    m.values_.reserve(rows.size() * items_);
    m.present_.reserve(rows.size() * items_);
    m.user_ids_.reserve(rows.size());
    m.rated_count_.reserve(rows.size());
    for (int u : rows) {
      m.user_ids_.push_back(user_ids_[u]);
      m.rated_count_.push_back(rated_count_[u]);
      const std::size_t base = index(u, 0);
      m.values_.insert(m.values_.end(), values_.begin() + base, values_.begin() + base + items_);
      m.present_.insert(m.present_.end(), present_.begin() + base,
                        present_.begin() + base + items_);
    }
    return m;
  }

  /// New matrix with extra partial rows appended (dynamic-training merge).
  /// Cells outside the listed ratings are missing.
  RatingMatrix with_appended_rows(const std::vector<PartialRow>& rows) const {
    RatingMatrix m = *this;
    for (const PartialRow& r : rows) {
      m.user_ids_.push_back(r.user_id);
      m.values_.insert(m.values_.end(), items_, 0.0);
      m.present_.insert(m.present_.end(), items_, 0);
      const std::size_t base = m.values_.size() - items_;
      int count = 0;
      for (const auto& [id, v] : r.ratings) {
        const int j = col_of(id);
        if (j < 0 || j >= items_) throw Error("appended rating for unknown item");
        if (!rating::in_bounds(v)) throw OutOfRangeRating(m.users(), j, v);
        if (!m.present_[base + j]) ++count;
        m.values_[base + j] = v;
        m.present_[base + j] = 1;
      }
      m.rated_count_.push_back(count);
    }
    return m;
  }

  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto fold = [&h](std::uint64_t w) {
      h ^= w;
      h *= 1099511628211ULL;
    };
    fold(static_cast<std::uint64_t>(items_));
    for (UserId id : user_ids_) fold(static_cast<std::uint64_t>(id));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      fold(present_[i]);
      if (present_[i]) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(double));
        std::memcpy(&bits, &values_[i], sizeof(bits));
        fold(bits);
      }
    }
    return h;
  }

 private:
  std::size_t index(int u, int j) const {
    return static_cast<std::size_t>(u) * static_cast<std::size_t>(items_) +
           static_cast<std::size_t>(j);
  }

  int items_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> present_;
  std::vector<int> rated_count_;
  std::vector<UserId> user_ids_;
};

/// The fixed item subset used to profile arriving users. Ids are kept sorted.
class GaugeSet {
 public:
  GaugeSet() = default;
  explicit GaugeSet(std::vector<ItemId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    if (ids_.empty()) throw Error("gauge set cannot be empty");
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end())
      throw Error("gauge set has duplicate item ids");
  }

  bool contains(ItemId id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
  }
  const std::vector<ItemId>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }

 private:
  std::vector<ItemId> ids_;
};

/// An arriving user's ratings on exactly the gauge items, ascending item id.
struct UserProfile {
  UserId user_id = 0;
  std::vector<ItemId> items;
  std::vector<double> ratings;
};

/// Read a user's gauge ratings out of a ground-truth matrix. Every gauge item
/// must be rated; the gauge derivation guarantees that for filtered users.
inline UserProfile profile_from_row(const RatingMatrix& m, int row, const GaugeSet& gauge) {
  UserProfile p;
  p.user_id = m.user_id(row);
  p.items = gauge.ids();
  p.ratings.reserve(p.items.size());
  for (ItemId id : p.items) {
    const int j = m.col_of(id);
    if (!m.has(row, j))
      throw DataError("user " + std::to_string(p.user_id) + " has no rating for gauge item " +
                      std::to_string(id));
    p.ratings.push_back(m.at(row, j));
  }
  return p;
}

struct ScoredItem {
  ItemId item = 0;
  double score = 0.0;
};

/// Ranked list of recommendable items. Scores are non-increasing and gauge
/// items never appear; both are checked at construction.
class RankedRecommendation {
 public:
  RankedRecommendation() = default;
  RankedRecommendation(std::vector<ScoredItem> entries, const GaugeSet& gauge)
      : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (gauge.contains(entries_[i].item))
        throw Error("gauge item " + std::to_string(entries_[i].item) + " in recommendation");
      if (i > 0 && entries_[i].score > entries_[i - 1].score)
        throw Error("recommendation scores must be non-increasing");
    }
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const ScoredItem& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<ScoredItem> entries_;
};

/// Common contract for the five methods: fit on a rating snapshot, then
/// produce a ranked list for a profiled user. Stochastic methods draw from
/// the caller's Rng, so a fitted model is safe to share across concurrent
/// recommend calls and every run is replayable from its seed.
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual void fit(const RatingMatrix& snapshot, const GaugeSet& gauge) = 0;
  virtual RankedRecommendation recommend(const UserProfile& profile, int top_n,
                                         Rng& rng) const = 0;
  virtual std::string_view name() const = 0;
  /// Hash of the fitted state; serving must never mutate it.
  virtual std::uint64_t state_hash() const = 0;
};

}  // namespace recsim
