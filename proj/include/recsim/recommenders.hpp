#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recsim/core.hpp"
#include "recsim/numerics.hpp"
#include "recsim/rng.hpp"

namespace recsim {

namespace detail {

inline std::vector<ItemId> recommendable_items(int items, const GaugeSet& gauge) {
  std::vector<ItemId> out;
  out.reserve(items);
  for (int j = 0; j < items; ++j) {
    const ItemId id = static_cast<ItemId>(j + 1);
    if (!gauge.contains(id)) out.push_back(id);
  }
  if (out.empty()) throw EmptyCatalog();
  return out;
}

inline std::uint64_t hash_doubles(std::uint64_t h, const std::vector<double>& xs) {
  for (double x : xs) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    h ^= bits;
    h *= 1099511628211ULL;
  }
  return h;
}

// Ranking scores for sampled orderings carry rank only, highest first; the
// sampled top item would otherwise break the non-increasing invariant.
inline RankedRecommendation positional(const std::vector<ItemId>& ordered, int top_n,
                                       const GaugeSet& gauge) {
  const std::size_t n = std::min<std::size_t>(ordered.size(), top_n < 0 ? 0 : top_n);
  std::vector<ScoredItem> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    entries.push_back({ordered[i], static_cast<double>(ordered.size() - i)});
  return RankedRecommendation(std::move(entries), gauge);
}

}  // namespace detail

/// Uniform random permutation of the recommendable catalog. The baseline with
/// the least inequality: every item gets an equal chance at the top slot.
class RandomRecommender final : public Recommender {
 public:
  void fit(const RatingMatrix& snapshot, const GaugeSet& gauge) override {
    gauge_ = gauge;
    recommendable_ = detail::recommendable_items(snapshot.items(), gauge);
  }

  RankedRecommendation recommend(const UserProfile&, int top_n, Rng& rng) const override {
    std::vector<ItemId> order = recommendable_;
    rng.shuffle(order);
    return detail::positional(order, top_n, gauge_);
  }

  std::string_view name() const override { return "random"; }

  std::uint64_t state_hash() const override {
    std::uint64_t h = 1469598103934665603ULL;
    for (ItemId id : recommendable_) h = (h ^ static_cast<std::uint64_t>(id)) * 1099511628211ULL;
    return h;
  }

 private:
  GaugeSet gauge_;
  std::vector<ItemId> recommendable_;
};

/// Popularity sampling: P_j = (r_j)^k / sum_i (r_i)^k over the recommendable
/// catalog, r_j the item's mean rating shifted by +10 into [0, 20] so the
/// weight stays non-negative and order-preserving (ratings can be negative).
/// Items with no ratings get the neutral shifted mean 10. k = 2 exaggerates
/// the head of the distribution.
class PopularityRecommender final : public Recommender {
 public:
  explicit PopularityRecommender(int exponent) : exponent_(exponent) {
    if (exponent < 1) throw ConfigError("popularity exponent must be >= 1");
  }

  void fit(const RatingMatrix& snapshot, const GaugeSet& gauge) override {
    gauge_ = gauge;
    recommendable_ = detail::recommendable_items(snapshot.items(), gauge);
    std::vector<double> shifted(snapshot.items(), 10.0);  // neutral prior for unrated items
    for (int j = 0; j < snapshot.items(); ++j) {
      double sum = 0.0;
      int count = 0;
      for (int u = 0; u < snapshot.users(); ++u)
        if (snapshot.has(u, j)) {
          sum += snapshot.at(u, j);
          ++count;
        }
      if (count > 0) shifted[j] = sum / count + 10.0;
    }
    probabilities_.resize(recommendable_.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < recommendable_.size(); ++i) {
      double w = 1.0;
      const double base = shifted[recommendable_[i] - 1];
      for (int e = 0; e < exponent_; ++e) w *= base;
      probabilities_[i] = w;
      mass += w;
    }
    if (mass <= 0.0) throw AllZeroMass();
    for (double& p : probabilities_) p /= mass;
  }

  RankedRecommendation recommend(const UserProfile&, int top_n, Rng& rng) const override {
    const std::size_t top = rng.weighted_index(probabilities_);
    std::vector<std::size_t> rest;
    rest.reserve(probabilities_.size() - 1);
    for (std::size_t i = 0; i < probabilities_.size(); ++i)
      if (i != top) rest.push_back(i);
    std::sort(rest.begin(), rest.end(), [this](std::size_t a, std::size_t b) {
      if (probabilities_[a] != probabilities_[b]) return probabilities_[a] > probabilities_[b];
      return recommendable_[a] < recommendable_[b];
    });
    std::vector<ItemId> order;
    order.reserve(probabilities_.size());
    order.push_back(recommendable_[top]);
    for (std::size_t i : rest) order.push_back(recommendable_[i]);
    return detail::positional(order, top_n, gauge_);
  }

  std::string_view name() const override { return exponent_ == 1 ? "pop1" : "pop2"; }

  std::uint64_t state_hash() const override {
    return detail::hash_doubles(0x9ae16a3b2f90404fULL + exponent_, probabilities_);
  }

  int exponent() const { return exponent_; }
  const std::vector<ItemId>& recommendable() const { return recommendable_; }
  const std::vector<double>& probabilities() const { return probabilities_; }
  double probability_of(ItemId id) const {
    const auto it = std::lower_bound(recommendable_.begin(), recommendable_.end(), id);
    if (it == recommendable_.end() || *it != id) return 0.0;
    return probabilities_[static_cast<std::size_t>(it - recommendable_.begin())];
  }

 private:
  int exponent_;
  GaugeSet gauge_;
  std::vector<ItemId> recommendable_;
  std::vector<double> probabilities_;
};

/// User-based collaborative filtering. Each training user is weighted by the
/// Pearson correlation between their gauge ratings and the profile's; an
/// item's score is the similarity-weighted average of the retained users'
/// ratings for it. Users with non-positive or undefined correlation are
/// discarded; keeping them clamped at zero would add the same zeros to both
/// sums.
class PearsonRecommender final : public Recommender {
 public:
  void fit(const RatingMatrix& snapshot, const GaugeSet& gauge) override {
    snapshot_ = snapshot;
    gauge_ = gauge;
    recommendable_ = detail::recommendable_items(snapshot.items(), gauge);
    const int g = gauge.size();
    gauge_rows_.assign(static_cast<std::size_t>(snapshot.users()) * g, 0.0);
    for (int u = 0; u < snapshot.users(); ++u)
      for (int k = 0; k < g; ++k) {
        const int j = snapshot.col_of(gauge.ids()[k]);
        if (!snapshot.has(u, j))
          throw DataError("training user " + std::to_string(snapshot.user_id(u)) +
                          " is missing gauge item " + std::to_string(gauge.ids()[k]));
        gauge_rows_[static_cast<std::size_t>(u) * g + k] = snapshot.at(u, j);
      }
    item_means_.assign(snapshot.items(), kUnscored);
    for (int j = 0; j < snapshot.items(); ++j) {
      double sum = 0.0;
      int count = 0;
      for (int u = 0; u < snapshot.users(); ++u)
        if (snapshot.has(u, j)) {
          sum += snapshot.at(u, j);
          ++count;
        }
      if (count > 0) item_means_[j] = sum / count;
    }
  }

  RankedRecommendation recommend(const UserProfile& profile, int top_n,
                                 Rng&) const override {
    const int g = gauge_.size();
    std::vector<std::pair<int, double>> weights;  // (training row, w), w in (0, 1]
    weights.reserve(snapshot_.users());
    for (int u = 0; u < snapshot_.users(); ++u) {
      const std::span<const double> row(&gauge_rows_[static_cast<std::size_t>(u) * g],
                                        static_cast<std::size_t>(g));
      const auto w = maybe_pearson(row, profile.ratings);
      if (w && *w > 0.0) weights.emplace_back(u, *w);
    }

    std::vector<double> scores(snapshot_.items(), kUnscored);
    if (weights.empty()) {
      // No similar users: fall back to popularity ordering by item mean.
      fallback_count_.fetch_add(1, std::memory_order_relaxed);
      for (ItemId id : recommendable_) scores[id - 1] = item_means_[id - 1];
    } else {
      for (ItemId id : recommendable_) {
        const int j = snapshot_.col_of(id);
        double num = 0.0, den = 0.0;
        for (const auto& [u, w] : weights)
          if (snapshot_.has(u, j)) {
            num += w * snapshot_.at(u, j);
            den += w;
          }
        if (den > 0.0) scores[j] = num / den;
      }
    }
    return rank_by_score(scores, top_n);
  }

  std::string_view name() const override { return "pearson"; }

  std::uint64_t state_hash() const override {
    std::uint64_t h = detail::hash_doubles(0x51ed270b8d4923ULL, gauge_rows_);
    return h ^ snapshot_.content_hash();
  }

  /// How many recommendations had to fall back to item-mean ordering.
  std::uint64_t fallback_count() const { return fallback_count_.load(); }

 private:
  // Strictly below any real score; items nobody contributed to rank last.
  static constexpr double kUnscored = -11.0;

  RankedRecommendation rank_by_score(const std::vector<double>& scores, int top_n) const {
    std::vector<ItemId> order = recommendable_;
    std::sort(order.begin(), order.end(), [&scores](ItemId a, ItemId b) {
      if (scores[a - 1] != scores[b - 1]) return scores[a - 1] > scores[b - 1];
      return a < b;
    });
    const std::size_t n = std::min<std::size_t>(order.size(), top_n < 0 ? 0 : top_n);
    std::vector<ScoredItem> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) entries.push_back({order[i], scores[order[i] - 1]});
    return RankedRecommendation(std::move(entries), gauge_);
  }

  RatingMatrix snapshot_;
  GaugeSet gauge_;
  std::vector<ItemId> recommendable_;
  std::vector<double> gauge_rows_;
  std::vector<double> item_means_;
  mutable std::atomic<std::uint64_t> fallback_count_{0};
};

/// Rank-k matrix factorization. Missing cells are imputed with the user's row
/// mean, rows are de-meaned, and the residual matrix is decomposed with SVD,
/// keeping the top k singular triplets. New users are folded into the latent
/// space from their gauge ratings alone, without refitting.
class MfRecommender final : public Recommender {
 public:
  explicit MfRecommender(int rank = 15) : rank_(rank) {
    if (rank < 1) throw ConfigError("mf rank must be >= 1");
  }

  void fit(const RatingMatrix& snapshot, const GaugeSet& gauge) override {
    if (snapshot.users() == 0) throw EmptyInput("mf_fit snapshot");
    gauge_ = gauge;
    items_ = snapshot.items();
    recommendable_ = detail::recommendable_items(snapshot.items(), gauge);
    row_means_.resize(snapshot.users());
    Mat centered(snapshot.users(), snapshot.items());
    for (int u = 0; u < snapshot.users(); ++u) {
      row_means_[u] = snapshot.row_mean(u);
      for (int j = 0; j < snapshot.items(); ++j)
        centered(u, j) = snapshot.has(u, j) ? snapshot.at(u, j) - row_means_[u] : 0.0;
    }
    factors_ = truncate_rank(svd(centered), rank_);
  }

  RankedRecommendation recommend(const UserProfile& profile, int top_n,
                                 Rng&) const override {
    const std::vector<double> preds = predict_profile(profile);
    std::vector<ItemId> order = recommendable_;
    std::sort(order.begin(), order.end(), [&preds](ItemId a, ItemId b) {
      if (preds[a - 1] != preds[b - 1]) return preds[a - 1] > preds[b - 1];
      return a < b;
    });
    const std::size_t n = std::min<std::size_t>(order.size(), top_n < 0 ? 0 : top_n);
    std::vector<ScoredItem> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) entries.push_back({order[i], preds[order[i] - 1]});
    return RankedRecommendation(std::move(entries), gauge_);
  }

  /// Fold-in: center the gauge ratings by their own mean, project through the
  /// gauge rows of V scaled by 1/sigma, then expand back over all items.
  std::vector<double> predict_profile(const UserProfile& profile) const {
    const int k = factors_.rank_terms();
    const double profile_mean =
        mean(std::span<const double>(profile.ratings.data(), profile.ratings.size()));
    std::vector<double> latent(k, 0.0);
    for (int f = 0; f < k; ++f) {
      if (factors_.sigma[f] < 1e-12) throw SingularProjection(f, factors_.sigma[f]);
      double acc = 0.0;
      for (std::size_t g = 0; g < profile.items.size(); ++g) {
        const int col = static_cast<int>(profile.items[g]) - 1;
        acc += (profile.ratings[g] - profile_mean) * factors_.vt(f, col);
      }
      latent[f] = acc / factors_.sigma[f];
    }
    std::vector<double> preds(items_, 0.0);
    for (int j = 0; j < items_; ++j) {
      double acc = 0.0;
      for (int f = 0; f < k; ++f) acc += latent[f] * factors_.sigma[f] * factors_.vt(f, j);
      preds[j] = acc + profile_mean;
    }
    return preds;
  }

  /// Reconstructed ratings for a training row (diagnostic: at full rank this
  /// reproduces every present training rating).
  std::vector<double> predict_training_row(int row) const {
    std::vector<double> preds(items_, 0.0);
    for (int j = 0; j < items_; ++j) {
      double acc = 0.0;
      for (int f = 0; f < factors_.rank_terms(); ++f)
        acc += factors_.u(row, f) * factors_.sigma[f] * factors_.vt(f, j);
      preds[j] = acc + row_means_[row];
    }
    return preds;
  }

  std::string_view name() const override { return "mf"; }

  std::uint64_t state_hash() const override {
    std::uint64_t h = detail::hash_doubles(0x8f31ac3d29ULL + rank_, factors_.sigma);
    h = detail::hash_doubles(h, factors_.u.data());
    h = detail::hash_doubles(h, factors_.vt.data());
    return detail::hash_doubles(h, row_means_);
  }

  int rank() const { return rank_; }
  const SvdResult& factors() const { return factors_; }

 private:
  int rank_;
  int items_ = 0;
  GaugeSet gauge_;
  std::vector<ItemId> recommendable_;
  std::vector<double> row_means_;
  SvdResult factors_;
};

/// The idealized baseline: serve each user their true highest-rated non-gauge
/// item, read straight from the ground-truth matrix. Only the row of the user
/// being served is ever consulted.
class OptimalRecommender final : public Recommender {
 public:
  explicit OptimalRecommender(std::shared_ptr<const RatingMatrix> ground_truth)
      : truth_(std::move(ground_truth)) {
    if (!truth_) throw ConfigError("optimal method needs a ground-truth matrix");
    for (int u = 0; u < truth_->users(); ++u)
      row_of_[truth_->user_id(u)] = u;
  }

  void fit(const RatingMatrix&, const GaugeSet& gauge) override { gauge_ = gauge; }

  RankedRecommendation recommend(const UserProfile& profile, int top_n,
                                 Rng&) const override {
    const auto it = row_of_.find(profile.user_id);
    if (it == row_of_.end()) throw UnknownUser(profile.user_id);
    const int row = it->second;
    std::vector<ScoredItem> rated;
    for (int j = 0; j < truth_->items(); ++j) {
      const ItemId id = truth_->item_id(j);
      if (gauge_.contains(id) || !truth_->has(row, j)) continue;
      rated.push_back({id, truth_->at(row, j)});
    }
    std::sort(rated.begin(), rated.end(), [](const ScoredItem& a, const ScoredItem& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.item < b.item;
    });
    if (top_n >= 0 && rated.size() > static_cast<std::size_t>(top_n)) rated.resize(top_n);
    return RankedRecommendation(std::move(rated), gauge_);
  }

  std::string_view name() const override { return "optimal"; }

  std::uint64_t state_hash() const override {
    std::uint64_t h = truth_->content_hash();
    for (ItemId id : gauge_.ids()) h = (h ^ static_cast<std::uint64_t>(id)) * 1099511628211ULL;
    return h;
  }

 private:
  std::shared_ptr<const RatingMatrix> truth_;
  std::unordered_map<UserId, int> row_of_;
  GaugeSet gauge_;
};

struct MethodParams {
  int mf_rank = 15;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"random", "pop1",    "pop2",
                                              "pearson", "mf", "optimal"};
  return names;
}

/// CLI method names -> instances. `ground_truth` is required by `optimal`.
inline std::unique_ptr<Recommender> make_recommender(
    std::string_view name, const MethodParams& params,
    std::shared_ptr<const RatingMatrix> ground_truth) {
  if (name == "random") return std::make_unique<RandomRecommender>();
  if (name == "pop1") return std::make_unique<PopularityRecommender>(1);
  if (name == "pop2") return std::make_unique<PopularityRecommender>(2);
  if (name == "pearson") return std::make_unique<PearsonRecommender>();
  if (name == "mf") return std::make_unique<MfRecommender>(params.mf_rank);
  if (name == "optimal") return std::make_unique<OptimalRecommender>(std::move(ground_truth));
  throw ConfigError("unknown method: " + std::string(name));
}

}  // namespace recsim
