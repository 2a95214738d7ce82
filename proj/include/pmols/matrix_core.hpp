#pragma once

// Dense real linear algebra shared by every other module: SVD with a
// numerical rank, least squares restricted to a column subset, orthogonal
// projections and mutual coherence.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmols/errors.hpp"

namespace pmols {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// sigma_i > rank_tol * sigma_1 counts toward the numerical rank.
inline constexpr double kDefaultRankTol = 1e-12;

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) {
    fail(ErrorKind::Validation, std::string(what) + " contains NaN or Inf entries");
  }
}

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    fail(ErrorKind::Validation, std::string(what) + " contains NaN or Inf entries");
  }
}

inline std::string shape_string(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

/// Builds a matrix from row-major entries, enforcing the size and finiteness invariants.
inline Matrix make_matrix(Index rows, Index cols, std::span<const double> row_major) {
  require(rows > 0 && cols > 0, ErrorKind::Dimension, "matrix dimensions must be positive");
  require(static_cast<Index>(row_major.size()) == rows * cols, ErrorKind::Dimension,
          "entry count " + std::to_string(row_major.size()) + " does not match " +
              std::to_string(rows) + "x" + std::to_string(cols));
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) a(i, j) = row_major[static_cast<std::size_t>(i * cols + j)];
  require_finite(a, "matrix");
  return a;
}

inline Matrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> flat;
  const Index r = static_cast<Index>(rows.size());
  const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
  for (const auto& row : rows) {
    require(static_cast<Index>(row.size()) == c, ErrorKind::Dimension, "ragged matrix literal");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return make_matrix(r, c, flat);
}

/// Strictly increasing list of column indices.
class IndexSet {
 public:
  IndexSet() = default;

  explicit IndexSet(std::vector<Index> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    require(std::adjacent_find(indices_.begin(), indices_.end()) == indices_.end(),
            ErrorKind::Validation, "index set contains duplicates");
    require(indices_.empty() || indices_.front() >= 0, ErrorKind::Validation,
            "index set contains a negative index");
  }

  IndexSet(std::initializer_list<Index> indices) : IndexSet(std::vector<Index>(indices)) {}

  static IndexSet range(Index count) {
    std::vector<Index> all(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) all[static_cast<std::size_t>(i)] = i;
    return IndexSet(std::move(all));
  }

  const std::vector<Index>& indices() const noexcept { return indices_; }
  Index size() const noexcept { return static_cast<Index>(indices_.size()); }
  bool empty() const noexcept { return indices_.empty(); }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  bool contains(Index i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
  }

  IndexSet united(std::span<const Index> extra) const {
    std::vector<Index> merged = indices_;
    merged.insert(merged.end(), extra.begin(), extra.end());
    return IndexSet(std::move(merged));
  }

  void check_bounds(Index cols) const {
    if (!indices_.empty() && indices_.back() >= cols) {
      fail(ErrorKind::Dimension, "index " + std::to_string(indices_.back()) +
                                     " out of range for " + std::to_string(cols) + " columns");
    }
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<Index> indices_;
};

struct SvdResult {
  Matrix U;  // m x min(m,n), orthonormal columns
  Vector singular_values;  // nonincreasing
  Matrix V;  // n x min(m,n), orthonormal columns
  Index numerical_rank = 0;
};

inline Index numerical_rank(const Vector& singular_values, double rank_tol) {
  if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
  const double cutoff = rank_tol * singular_values(0);
  Index r = 0;
  for (Index i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > cutoff) ++r;
  return r;
}

/// Thin SVD. Throws DecompositionFailure if the iteration does not converge.
inline SvdResult svd(const Matrix& a, double rank_tol = kDefaultRankTol) {
  require(rank_tol > 0.0, ErrorKind::Domain, "rank_tol must be positive");
  require(a.rows() > 0 && a.cols() > 0, ErrorKind::Dimension, "svd of an empty matrix");
  require_finite(a, "svd input");
  SvdResult out;
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() == Eigen::Success) {
    out = {dec.matrixU(), dec.singularValues(), dec.matrixV(), 0};
  }
  // Eigen 3.4's BDCSVD can return garbage with Success on clustered spectra
  // (e.g. projectors); check the factorization and redo it with Jacobi if needed.
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  const bool ok = dec.info() == Eigen::Success && out.singular_values.allFinite() &&
                  (out.U * out.singular_values.asDiagonal() * out.V.transpose() - a).norm() <= 1e-10 * scale;
  if (!ok) {
    Eigen::JacobiSVD<Matrix> jac(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (jac.info() != Eigen::Success) {
      fail(ErrorKind::DecompositionFailure, "svd did not converge for " + shape_string(a) + " matrix");
    }
    out = {jac.matrixU(), jac.singularValues(), jac.matrixV(), 0};
  }
  out.numerical_rank = numerical_rank(out.singular_values, rank_tol);
  return out;
}

inline Matrix columns(const Matrix& a, const IndexSet& s) {
  s.check_bounds(a.cols());
  return a(Eigen::all, s.indices());
}

/// Scales every column to unit l2 norm. A zero column is an error.
inline Matrix normalize_columns(const Matrix& a) {
  Matrix out = a;
  for (Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (!(norm > 0.0)) {
      fail(ErrorKind::ZeroColumn, "column " + std::to_string(j) + " has zero l2 norm");
    }
    out.col(j) /= norm;
  }
  return out;
}

namespace detail {

inline double max_offdiagonal_abs(const Matrix& gram) {
  double best = 0.0;
  for (Index j = 1; j < gram.cols(); ++j)
    for (Index i = 0; i < j; ++i) best = std::max(best, std::abs(gram(i, j)));
  return std::clamp(best, 0.0, 1.0);
}

}  // namespace detail

/// max_{i<j} |<a_i,a_j>| / (|a_i| |a_j|), clamped to [0,1].
inline double mutual_coherence(const Matrix& a) {
  require(a.cols() >= 2, ErrorKind::Dimension, "mutual coherence needs at least two columns");
  require_finite(a, "coherence input");
  const Matrix unit = normalize_columns(a);
  return detail::max_offdiagonal_abs(unit.transpose() * unit);
}

/// Coherence over the columns whose norm exceeds null_tol * (largest column norm).
/// Columns of a rank-deficient product such as P*Psi can vanish exactly.
inline double mutual_coherence_ignoring_null_columns(const Matrix& a, double null_tol = 1e-12) {
  require_finite(a, "coherence input");
  const Vector norms = a.colwise().norm().transpose();
  const double largest = norms.size() > 0 ? norms.maxCoeff() : 0.0;
  std::vector<Index> kept;
  for (Index j = 0; j < a.cols(); ++j)
    if (norms(j) > null_tol * largest && norms(j) > 0.0) kept.push_back(j);
  if (kept.size() < 2) return 0.0;
  return mutual_coherence(a(Eigen::all, kept));
}

/// Coefficients u minimising |y - Phi_S u|_2, via column-pivoted Householder QR.
inline Vector least_squares_on_support(const Matrix& phi, const Vector& y, const IndexSet& s,
                                       double rank_tol = kDefaultRankTol) {
  require(y.size() == phi.rows(), ErrorKind::Dimension,
          "sample vector length " + std::to_string(y.size()) + " does not match " +
              std::to_string(phi.rows()) + " rows");
  s.check_bounds(phi.cols());
  if (s.empty()) return Vector(0);
  if (s.size() > phi.rows()) {
    fail(ErrorKind::RankDeficient, "support of size " + std::to_string(s.size()) +
                                       " exceeds the " + std::to_string(phi.rows()) + " rows");
  }
  const Matrix sub = columns(phi, s);
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  qr.setThreshold(rank_tol);
  if (qr.rank() < s.size()) {
    fail(ErrorKind::RankDeficient, "columns on the support are linearly dependent (rank " +
                                       std::to_string(qr.rank()) + " < " +
                                       std::to_string(s.size()) + ")");
  }
  return qr.solve(y);
}

/// v - Phi_S Phi_S^+ v.
inline Vector project_orthogonal_complement(const Matrix& phi, const IndexSet& s, const Vector& v,
                                            double rank_tol = kDefaultRankTol) {
  if (s.empty()) {
    require(v.size() == phi.rows(), ErrorKind::Dimension, "vector length does not match rows");
    return v;
  }
  const Vector coeffs = least_squares_on_support(phi, v, s, rank_tol);
  return v - columns(phi, s) * coeffs;
}

inline double frobenius_distance_to_identity(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorKind::Dimension,
          "distance to identity needs a square matrix, got " + shape_string(a));
  return (a - Matrix::Identity(a.rows(), a.cols())).norm();
}

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace pmols
