#pragma once

#include <stdexcept>
#include <string>

namespace recsim {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration. CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or insufficient input data. CLI maps this to exit code 3.
struct DataError : Error {
  using Error::Error;
};

struct OutOfRangeRating : DataError {
  OutOfRangeRating(int row, int col, double value)
      : DataError("rating out of range [-10,10] at row " + std::to_string(row) +
                  ", col " + std::to_string(col) + ": " + std::to_string(value)) {}
};

struct RaggedGrid : DataError {
  RaggedGrid(int row, std::size_t expected, std::size_t actual)
      : DataError("ragged grid: row " + std::to_string(row) + " has " +
                  std::to_string(actual) + " columns, expected " + std::to_string(expected)) {}
};

struct CountMismatch : DataError {
  CountMismatch(int row, int declared, int actual)
      : DataError("declared rated count " + std::to_string(declared) + " at row " +
                  std::to_string(row) + " does not match recomputed count " +
                  std::to_string(actual)) {}
};

struct EmptyDataset : DataError {
  explicit EmptyDataset(const std::string& origin)
      : DataError("dataset is empty: " + origin) {}
};

struct InsufficientGaugeCandidates : DataError {
  InsufficientGaugeCandidates(int found, int wanted)
      : DataError("only " + std::to_string(found) + " fully-rated items, need " +
                  std::to_string(wanted) + " for the gauge set"),
        found(found) {}
  int found;
};

struct NotEnoughUsers : DataError {
  NotEnoughUsers(int available, int requested)
      : DataError("split needs " + std::to_string(requested) + " users but only " +
                  std::to_string(available) + " are available") {}
};

struct LengthMismatch : Error {
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("vector length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

struct EmptyInput : Error {
  explicit EmptyInput(const std::string& what) : Error("empty input: " + what) {}
};

// Undefined similarity (constant input); callers decide the fallback.
struct ZeroVariance : Error {
  ZeroVariance() : Error("zero variance input, correlation undefined") {}
};

struct NonConvergence : Error {
  explicit NonConvergence(int sweeps)
      : Error("SVD did not converge within " + std::to_string(sweeps) + " sweeps") {}
};

struct RankOutOfRange : Error {
  RankOutOfRange(int k, int r)
      : Error("rank " + std::to_string(k) + " outside [1, " + std::to_string(r) + "]") {}
};

struct EmptyCatalog : Error {
  EmptyCatalog() : Error("no recommendable items (catalog minus gauge is empty)") {}
};

struct AllZeroMass : Error {
  AllZeroMass() : Error("every recommendable item has zero popularity mass") {}
};

struct NoSimilarUsers : Error {
  NoSimilarUsers() : Error("all training-user similarities were discarded") {}
};

struct SingularProjection : Error {
  SingularProjection(int index, double sigma)
      : Error("singular value " + std::to_string(index) + " too small for fold-in: " +
              std::to_string(sigma)) {}
};

struct UnknownUser : Error {
  explicit UnknownUser(long long id)
      : Error("user " + std::to_string(id) + " not present in the ground-truth matrix") {}
};

struct AllZero : Error {
  AllZero() : Error("gini undefined for an all-zero count vector") {}
};

struct DegenerateRegression : Error {
  DegenerateRegression() : Error("regression undefined: all item rating counts are equal") {}
};

}  // namespace recsim
