#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "recsim/core.hpp"
#include "recsim/csv.hpp"
#include "recsim/errors.hpp"
#include "recsim/rng.hpp"

namespace recsim {

struct DatasetConfig {
  std::string path;
  double min_rated_fraction = 0.5;
  int train_size = 500;
  int test_size = 4000;
  std::uint64_t seed = 0;
};

/// Parse a Jester-format table: one row per user, first column the user's
/// declared rated count, remaining columns per-item values with 99 = missing.
/// Comma or tab delimited (detected on the first row); an optional header row
/// is recognized by a non-numeric first field. The declared count column is
/// validated against the recomputed count, not trusted.
inline RatingMatrix parse_jester(std::istream& in, const std::string& origin) {
  std::string line;
  std::vector<std::vector<double>> grid;
  std::vector<int> declared;
  char delim = ',';
  int row = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    std::string_view sv = csv::trim(line);
    if (sv.empty()) continue;
    if (first_content_line) {
      delim = csv::detect_delimiter(sv);
      double probe;
      if (!csv::parse_number(csv::split(sv, delim)[0], probe)) {
        first_content_line = false;
        continue;  // header row
      }
      first_content_line = false;
    }
    const auto fields = csv::split(sv, delim);
    if (fields.size() < 2)
      throw DataError(origin + ": row " + std::to_string(row) + " has no item columns");
    const double count_field = csv::require_number(fields[0], origin, row, 0);
    if (count_field < 0 || count_field != std::floor(count_field))
      throw DataError(origin + ": declared rated count at row " + std::to_string(row) +
                      " is not a non-negative integer");
    declared.push_back(static_cast<int>(count_field));
    std::vector<double> cells;
    cells.reserve(fields.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c)
      cells.push_back(csv::require_number(fields[c], origin, row, static_cast<int>(c)));
    if (!grid.empty() && cells.size() != grid[0].size())
      throw RaggedGrid(row, grid[0].size(), cells.size());
    grid.push_back(std::move(cells));
    ++row;
  }
  if (grid.empty()) throw EmptyDataset(origin);

  RatingMatrix m = RatingMatrix::validate(grid);
  for (int u = 0; u < m.users(); ++u)
    if (m.rated_count(u) != declared[u]) throw CountMismatch(u, declared[u], m.rated_count(u));
  return m;
}

inline RatingMatrix load_jester_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return parse_jester(in, path);
}

/// Inverse of parse_jester. Numbers are written in shortest round-trip form,
/// so save -> load preserves every cell bit-exactly.
inline void write_jester_csv(const RatingMatrix& m, std::ostream& out) {
  for (int u = 0; u < m.users(); ++u) {
    out << m.rated_count(u);
    for (int j = 0; j < m.items(); ++j) {
      out << ',';
      if (m.has(u, j))
        out << format_double(m.at(u, j));
      else
        out << "99";
    }
    out << '\n';
  }
}

inline void save_jester_csv(const RatingMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  write_jester_csv(m, out);
}

/// Keep users who rated at least ceil(min_rated_fraction * items) items,
/// boundary inclusive. Original user ids travel with their rows.
inline RatingMatrix filter_users(const RatingMatrix& m, double min_rated_fraction) {
  if (min_rated_fraction < 0.0 || min_rated_fraction > 1.0)
    throw ConfigError("min rated fraction must be in [0, 1]");
  const int threshold =
      static_cast<int>(std::ceil(min_rated_fraction * m.items() - 1e-9));
  std::vector<int> keep;
  for (int u = 0; u < m.users(); ++u)
    if (m.rated_count(u) >= threshold) keep.push_back(u);
  return m.select_rows(keep);
}

/// The gauge set: the `size` items rated by every user of the (filtered)
/// matrix, lowest item ids first when more qualify.
inline GaugeSet derive_gauge_set(const RatingMatrix& m, int size = 10) {
  std::vector<ItemId> full;
  for (int j = 0; j < m.items(); ++j) {
    bool everyone = m.users() > 0;
    for (int u = 0; u < m.users() && everyone; ++u) everyone = m.has(u, j);
    if (everyone) full.push_back(m.item_id(j));
    if (static_cast<int>(full.size()) == size) break;  // ids ascend, ties resolved
  }
  if (static_cast<int>(full.size()) < size)
    throw InsufficientGaugeCandidates(static_cast<int>(full.size()), size);
  return GaugeSet(full);
}

/// Disjoint uniform random train/test subsets of the stated sizes; everyone
/// else is discarded. Row order of both outputs is the shuffled draw order,
/// which doubles as the arrival order of test users downstream.
inline std::pair<RatingMatrix, RatingMatrix> split_users(const RatingMatrix& m,
                                                         const DatasetConfig& config,
                                                         Rng& rng) {
  if (config.train_size < 0 || config.test_size < 0)
    throw ConfigError("split sizes must be non-negative");
  if (config.train_size + config.test_size > m.users())
    throw NotEnoughUsers(m.users(), config.train_size + config.test_size);
  std::vector<int> idx(m.users());
  for (int i = 0; i < m.users(); ++i) idx[i] = i;
  rng.shuffle(idx);
  const std::vector<int> train_rows(idx.begin(), idx.begin() + config.train_size);
  const std::vector<int> test_rows(idx.begin() + config.train_size,
                                   idx.begin() + config.train_size + config.test_size);
  return {m.select_rows(train_rows), m.select_rows(test_rows)};
}

}  // namespace recsim
