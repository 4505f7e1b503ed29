#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "recsim/errors.hpp"

namespace recsim {

/// Minimal dense row-major matrix. The problem sizes here top out around
/// 4500 x 100, so there is no need for anything cleverer.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw EmptyInput("mean");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Population covariance: sum of centered cross products divided by n, not
/// n-1. The 1/n factor cancels in the correlation ratio anyway.
inline double population_covariance(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch(xs.size(), ys.size());
  if (xs.empty()) throw EmptyInput("population_covariance");
  const double mx = mean(xs);
  const double my = mean(ys);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - mx) * (ys[i] - my);
  return s / static_cast<double>(xs.size());
}

inline double population_variance(std::span<const double> xs) {
  return population_covariance(xs, xs);
}

namespace detail {
inline bool all_equal(std::span<const double> xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] != xs[0]) return false;
  return true;
}
}  // namespace detail

/// Pearson correlation cov(X,Y) / (sigma_X sigma_Y), clamped into [-1, 1]
/// against floating-point drift. Returns nullopt when either input is
/// constant, where the ratio is undefined.
inline std::optional<double> maybe_pearson(std::span<const double> xs,
                                           std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch(xs.size(), ys.size());
  if (xs.size() < 2) throw EmptyInput("pearson needs length >= 2");
  if (detail::all_equal(xs) || detail::all_equal(ys)) return std::nullopt;
  const double sx = std::sqrt(population_variance(xs));
  const double sy = std::sqrt(population_variance(ys));
  if (sx == 0.0 || sy == 0.0) return std::nullopt;
  const double r = population_covariance(xs, ys) / (sx * sy);
  return std::clamp(r, -1.0, 1.0);
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const auto r = maybe_pearson(xs, ys);
  if (!r) throw ZeroVariance();
  return *r;
}

// Braced-list conveniences; spans cannot bind to initializer lists directly.
inline double mean(std::initializer_list<double> xs) {
  return mean(std::span<const double>(xs.begin(), xs.size()));
}
inline double population_covariance(std::initializer_list<double> xs,
                                    std::initializer_list<double> ys) {
  return population_covariance(std::span<const double>(xs.begin(), xs.size()),
                               std::span<const double>(ys.begin(), ys.size()));
}
inline std::optional<double> maybe_pearson(std::initializer_list<double> xs,
                                           std::initializer_list<double> ys) {
  return maybe_pearson(std::span<const double>(xs.begin(), xs.size()),
                       std::span<const double>(ys.begin(), ys.size()));
}
inline double pearson(std::initializer_list<double> xs, std::initializer_list<double> ys) {
  return pearson(std::span<const double>(xs.begin(), xs.size()),
                 std::span<const double>(ys.begin(), ys.size()));
}

/// Thin SVD: U is m x r with orthonormal columns, sigma holds r non-increasing
/// non-negative values, Vt is r x n with orthonormal rows, r = min(m, n).
struct SvdResult {
  Mat u;
  std::vector<double> sigma;
  Mat vt;

  int rank_terms() const { return static_cast<int>(sigma.size()); }
};

/// U * diag(sigma) * Vt.
inline Mat reconstruct(const SvdResult& s) {
  const int m = s.u.rows();
  const int n = s.vt.cols();
  const int r = s.rank_terms();
  Mat out(m, n);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < r; ++k) {
      const double w = s.u(i, k) * s.sigma[k];
      if (w == 0.0) continue;
      for (int j = 0; j < n; ++j) out(i, j) += w * s.vt(k, j);
    }
  return out;
}

namespace detail {

// One-sided Jacobi on the columns of B (m x n, m >= n). Plane rotations
// orthogonalize column pairs; V accumulates them. On exit the column norms of
// B are the singular values and B's normalized columns are U.
//
// Convergence: a sweep that applies no rotation (every pair already satisfies
// |b_p . b_q| <= tol * |b_p| |b_q|), or the off-diagonal Gram mass dropping
// below 1e-12 of its initial value. Cap: max_sweeps, then NonConvergence.
struct JacobiState {
  Mat b;
  Mat v;
};

inline double offdiag_gram_mass(const Mat& b) {
  const int n = b.cols();
  const int m = b.rows();
  double mass = 0.0;
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      double dot = 0.0;
      for (int i = 0; i < m; ++i) dot += b(i, p) * b(i, q);
      mass += dot * dot;
    }
  return std::sqrt(mass);
}

inline void jacobi_orthogonalize(JacobiState& st, int max_sweeps) {
  constexpr double kRotTol = 1e-13;
  Mat& b = st.b;
  Mat& v = st.v;
  const int m = b.rows();
  const int n = b.cols();

  const double initial_mass = offdiag_gram_mass(b);
  if (initial_mass == 0.0) return;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < m; ++i) {
          alpha += b(i, p) * b(i, p);
          beta += b(i, q) * b(i, q);
          gamma += b(i, p) * b(i, q);
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kRotTol * std::sqrt(alpha * beta)) continue;
        rotated = true;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double bp = b(i, p);
          const double bq = b(i, q);
          b(i, p) = c * bp - s * bq;
          b(i, q) = s * bp + c * bq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
    if (offdiag_gram_mass(b) <= 1e-12 * initial_mass) return;
  }
  throw NonConvergence(max_sweeps);
}

// Fill the columns of u whose singular value is (numerically) zero with an
// orthonormal completion, Gram-Schmidt against everything already placed.
inline void complete_orthonormal(Mat& u, const std::vector<bool>& filled) {
  const int m = u.rows();
  const int r = u.cols();
  std::vector<int> done;
  for (int k = 0; k < r; ++k)
    if (filled[k]) done.push_back(k);
  int candidate = 0;
  for (int k = 0; k < r; ++k) {
    if (filled[k]) continue;
    bool placed = false;
    while (candidate < m && !placed) {
      std::vector<double> col(m, 0.0);
      col[candidate] = 1.0;
      for (int d : done) {
        double proj = 0.0;
        for (int i = 0; i < m; ++i) proj += col[i] * u(i, d);
        for (int i = 0; i < m; ++i) col[i] -= proj * u(i, d);
      }
      double norm = 0.0;
      for (double x : col) norm += x * x;
      norm = std::sqrt(norm);
      ++candidate;
      if (norm > 0.5) {  // e_i at most half-absorbed by the existing span
        for (int i = 0; i < m; ++i) u(i, k) = col[i] / norm;
        done.push_back(k);
        placed = true;
      }
    }
    if (!placed) throw Error("orthonormal completion failed");
  }
}

}  // namespace detail

/// Singular value decomposition via one-sided Jacobi. Accurate and simple at
/// this problem scale; wide inputs are factored through their transpose.
inline SvdResult svd(const Mat& a, int max_sweeps = 100) {
  if (a.rows() == 0 || a.cols() == 0) throw EmptyInput("svd");
  for (double v : a.data())
    if (!std::isfinite(v)) throw Error("svd input has non-finite entries");

  if (a.rows() < a.cols()) {  // factor A^T = U' S V'^T, then A = V' S U'^T
    SvdResult t = svd(a.transposed(), max_sweeps);
    SvdResult out;
    out.u = t.vt.transposed();
    out.sigma = std::move(t.sigma);
    out.vt = t.u.transposed();
    return out;
  }

  const int m = a.rows();
  const int n = a.cols();
  detail::JacobiState st{a, Mat::identity(n)};
  detail::jacobi_orthogonalize(st, max_sweeps);

  // Column norms are the singular values; sort them non-increasing.
  std::vector<double> norms(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += st.b(i, j) * st.b(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&norms](int x, int y) { return norms[x] > norms[y]; });

  SvdResult out;
  out.sigma.resize(n);
  out.u = Mat(m, n);
  out.vt = Mat(n, n);
  const double sigma_max = norms[order[0]];
  const double zero_tol = sigma_max * 1e-13;  // below this, normalize via completion
  std::vector<bool> filled(n, false);
  for (int k = 0; k < n; ++k) {
    const int j = order[k];
    out.sigma[k] = norms[j];
    for (int i = 0; i < n; ++i) out.vt(k, i) = st.v(i, j);
    if (norms[j] > zero_tol) {
      for (int i = 0; i < m; ++i) out.u(i, k) = st.b(i, j) / norms[j];
      filled[k] = true;
    }
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end())
    detail::complete_orthonormal(out.u, filled);
  return out;
}

/// Keep the first k singular triplets.
inline SvdResult truncate_rank(const SvdResult& s, int k) {
  const int r = s.rank_terms();
  if (k < 1 || k > r) throw RankOutOfRange(k, r);
  SvdResult out;
  out.sigma.assign(s.sigma.begin(), s.sigma.begin() + k);
  out.u = Mat(s.u.rows(), k);
  for (int i = 0; i < s.u.rows(); ++i)
    for (int j = 0; j < k; ++j) out.u(i, j) = s.u(i, j);
  out.vt = Mat(k, s.vt.cols());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < s.vt.cols(); ++j) out.vt(i, j) = s.vt(i, j);
  return out;
}

}  // namespace recsim
