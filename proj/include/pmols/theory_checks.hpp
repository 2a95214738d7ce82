#pragma once

// Numerical verifiers for the RIP / coherence inequalities the recovery
// guarantees rest on. Each check reports the worst slack (RHS - LHS) seen;
// a violation is a slack below -tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pmols/errors.hpp"
#include "pmols/experiments.hpp"
#include "pmols/matrix_core.hpp"
#include "pmols/precondition.hpp"

namespace pmols {

inline constexpr double kCheckTol = 1e-10;
inline constexpr double kRipBudget = 1e5;

struct CheckReport {
  std::string name;
  long long instances_tested = 0;
  long long violations = 0;
  long long skipped = 0;  // instances whose preconditions did not hold
  double worst_margin = std::numeric_limits<double>::infinity();
  double tolerance = kCheckTol;

  void record(double margin) {
    ++instances_tested;
    worst_margin = std::min(worst_margin, margin);
    if (margin < -tolerance) ++violations;
  }

  void merge(const CheckReport& other) {
    instances_tested += other.instances_tested;
    violations += other.violations;
    skipped += other.skipped;
    worst_margin = std::min(worst_margin, other.worst_margin);
  }

  bool passed() const { return violations == 0; }
};

inline std::string to_csv(const std::vector<CheckReport>& reports) {
  std::string s = "name,instances_tested,violations,skipped,worst_margin,tolerance\n";
  for (const auto& r : reports) {
    s += r.name + ',' + std::to_string(r.instances_tested) + ',' + std::to_string(r.violations) + ',' +
         std::to_string(r.skipped) + ',' + format_double(r.worst_margin) + ',' +
         format_double(r.tolerance) + '\n';
  }
  return s;
}

/// C(n, k) as a double; exact well beyond the 1e5 budget.
inline double binomial(Index n, Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

namespace detail {

/// Calls fn(indices) for every size-k subset of {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(Index n, Index k, Fn&& fn) {
  std::vector<Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Index{0});
  while (true) {
    fn(idx);
    Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

inline void require_unit_columns(const Matrix& phi) {
  for (Index j = 0; j < phi.cols(); ++j) {
    const double norm = phi.col(j).norm();
    require(std::abs(norm - 1.0) <= 1e-10, ErrorKind::Validation,
            "column " + std::to_string(j) + " has norm " + format_double(norm) + "; normalize first");
  }
}

}  // namespace detail

/// delta_k = max over |S| = k of max(lambda_max(G_S) - 1, 1 - lambda_min(G_S)), G_S = Phi_S^T Phi_S.
inline double brute_force_rip_constant(const Matrix& phi, Index k) {
  require(k >= 0 && k <= phi.cols(), ErrorKind::Domain,
          "k = " + std::to_string(k) + " must lie in [0, " + std::to_string(phi.cols()) + "]");
  require_finite(phi, "RIP input");
  if (k == 0) return 0.0;
  const double count = binomial(phi.cols(), k);
  if (count > kRipBudget) {
    fail(ErrorKind::Budget, "C(" + std::to_string(phi.cols()) + ", " + std::to_string(k) + ") = " +
                                format_double(count) + " supports exceeds the budget of 1e5");
  }
  const Matrix gram = phi.transpose() * phi;
  double delta = 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  detail::for_each_subset(phi.cols(), k, [&](const std::vector<Index>& s) {
    eig.compute(gram(s, s), Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();  // ascending
    delta = std::max({delta, ev(ev.size() - 1) - 1.0, 1.0 - ev(0)});
  });
  return delta;
}

/// The four RIP consequences for Phi_S and u: delta <= (|S|-1) mu, and the
/// two-sided bounds on |G^-1 u|, |G u| and |(Phi_S^+)^T u|^2.
inline CheckReport check_rip_consequences(const Matrix& phi, const IndexSet& s, const Vector& u,
                                          std::optional<double> delta_s = std::nullopt) {
  detail::require_unit_columns(phi);
  s.check_bounds(phi.cols());
  require(u.size() == s.size(), ErrorKind::Dimension, "u must have one entry per support index");
  CheckReport rep{"rip-consequences"};
  const double delta = delta_s ? *delta_s : brute_force_rip_constant(phi, s.size());
  if (!(delta < 1.0) || s.empty()) {
    ++rep.skipped;
    return rep;
  }
  const double mu = phi.cols() >= 2 ? mutual_coherence(phi) : 0.0;
  const double k = static_cast<double>(s.size());
  rep.record((k - 1.0) * mu - delta);

  const Matrix phi_s = columns(phi, s);
  const Matrix g = phi_s.transpose() * phi_s;
  const Eigen::LDLT<Matrix> ldlt(g);
  const Vector g_inv_u = ldlt.solve(u);
  const double un = u.norm();
  const double scale = std::max(1.0, un);
  rep.record((g_inv_u.norm() - un / (1.0 + delta)) / scale);
  rep.record((un / (1.0 - delta) - g_inv_u.norm()) / scale);
  const double gu = (g * u).norm();
  rep.record((gu - (1.0 - delta) * un) / scale);
  rep.record(((1.0 + delta) * un - gu) / scale);
  // (Phi_S^+)^T u = Phi_S G^-1 u
  const double w2 = (phi_s * g_inv_u).squaredNorm();
  const double scale2 = std::max(1.0, un * un);
  rep.record((un * un - (1.0 - delta) * w2) / scale2);
  rep.record(((1.0 + delta) * w2 - un * un) / scale2);
  return rep;
}

/// |u^T A v|^2 <= ((l1 - ln + (l1 + ln) phi) / (l1 + ln + (l1 - ln) phi))^2 (u^T A u)(v^T A v).
/// The margin is normalised by the right-hand side.
inline CheckReport check_wielandt(const Matrix& a, const Vector& u, const Vector& v) {
  require(a.rows() == a.cols(), ErrorKind::Dimension, "Wielandt check needs a square matrix");
  require(u.size() == a.rows() && v.size() == a.rows(), ErrorKind::Dimension,
          "vector lengths must match the matrix");
  require(max_abs(a - a.transpose()) <= 1e-12 * std::max(1.0, max_abs(a)), ErrorKind::Validation,
          "matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
  const double l1 = eig.eigenvalues().maxCoeff();
  const double ln = eig.eigenvalues().minCoeff();
  require(l1 > 0.0 && ln > 1e-10 * l1, ErrorKind::Validation, "matrix is not positive definite");
  require(u.norm() > 0.0 && v.norm() > 0.0, ErrorKind::Validation, "u and v must be nonzero");

  const double phi = std::min(1.0, std::abs(u.dot(v)) / (u.norm() * v.norm()));
  const double factor = (l1 - ln + (l1 + ln) * phi) / (l1 + ln + (l1 - ln) * phi);
  const double uav = u.dot(a * v);
  const double rhs = factor * factor * u.dot(a * u) * v.dot(a * v);
  CheckReport rep{"wielandt"};
  rep.record((rhs - uav * uav) / rhs);
  return rep;
}

/// |Phi_I1^T Phi_I2|_2 <= sqrt(|I1| |I2|) mu(Phi) for disjoint I1, I2, on the column-normalised Phi.
inline CheckReport check_cross_gram_bound(const Matrix& phi, const IndexSet& i1, const IndexSet& i2) {
  i1.check_bounds(phi.cols());
  i2.check_bounds(phi.cols());
  for (Index i : i1) {
    if (i2.contains(i)) fail(ErrorKind::Overlap, "index " + std::to_string(i) + " is in both sets");
  }
  CheckReport rep{"cross-gram"};
  if (i1.empty() || i2.empty()) {
    rep.record(0.0);
    return rep;
  }
  const Matrix unit = normalize_columns(phi);
  const Matrix cross = columns(unit, i1).transpose() * columns(unit, i2);
  const double lhs = svd(cross).singular_values(0);
  const double rhs = std::sqrt(static_cast<double>(i1.size() * i2.size())) * mutual_coherence(unit);
  rep.record(rhs - lhs);
  return rep;
}

/// |P_S^perp phi_i|_2 >= sqrt(1 - delta_{|S|+1}^2) for unit-column Phi and i not in S.
inline CheckReport check_projection_bound(const Matrix& phi, const IndexSet& s, Index i,
                                          std::optional<double> delta_s1 = std::nullopt) {
  detail::require_unit_columns(phi);
  s.check_bounds(phi.cols());
  require(i >= 0 && i < phi.cols(), ErrorKind::Dimension, "column index out of range");
  require(!s.contains(i), ErrorKind::Validation, "index " + std::to_string(i) + " belongs to S");
  CheckReport rep{"projection-bound"};
  const double delta = delta_s1 ? *delta_s1 : brute_force_rip_constant(phi, s.size() + 1);
  if (!(delta < 1.0)) {
    ++rep.skipped;
    return rep;
  }
  const double lhs = project_orthogonal_complement(phi, s, phi.col(i)).norm();
  rep.record(lhs - std::sqrt(1.0 - delta * delta));
  return rep;
}

/// Tail frequencies of sigma_1 >= sqrt(n/m) + 1 + eps and sigma_m <= sqrt(n/m) - 1 - eps
/// over Gaussian N(0, 1/m) draws, against exp(-m eps^2 / 2) plus three binomial SE.
inline CheckReport check_singular_concentration(Index m, Index n, double eps, int trials,
                                                std::uint64_t seed, unsigned workers = 1) {
  require(m >= 1 && m <= n, ErrorKind::Domain, "need 1 <= m <= n");
  require(trials >= 100, ErrorKind::Domain, "need at least 100 trials");
  require(std::isfinite(eps) && eps >= 0.0, ErrorKind::Domain, "eps must be nonnegative");
  std::vector<double> top(static_cast<std::size_t>(trials)), bottom(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), workers, [&](std::size_t t) {
    const Matrix psi = gen_gaussian_matrix(m, n, derive_seed(seed, "singular", static_cast<std::uint64_t>(m), t));
    const Vector sv = Eigen::JacobiSVD<Matrix>(psi).singularValues();
    top[t] = sv(0);
    bottom[t] = sv(m - 1);
  });
  CheckReport rep{"singular-concentration"};
  const double centre = std::sqrt(static_cast<double>(n) / static_cast<double>(m));
  const double bound = std::min(1.0, std::exp(-static_cast<double>(m) * eps * eps / 2.0));
  const double se = std::sqrt(bound * (1.0 - bound) / trials);
  int hi = 0, lo = 0;
  for (int t = 0; t < trials; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    if (top[ut] >= centre + 1.0 + eps) ++hi;
    if (bottom[ut] <= centre - 1.0 - eps) ++lo;
    rep.record(top[ut] - bottom[ut]);
  }
  rep.record(bound + 3.0 * se - static_cast<double>(hi) / trials);
  rep.record(bound + 3.0 * se - static_cast<double>(lo) / trials);
  return rep;
}

/// mu(P Psi) <= (nu + mu(Psi)) / (1 + nu mu(Psi)) <= nu + mu(Psi) for full-row-rank Psi, m < n.
/// Near-zero columns are left out of both coherences.
inline CheckReport check_coherence_chain(const Matrix& psi) {
  require(psi.rows() < psi.cols(), ErrorKind::Dimension, "coherence chain needs m < n");
  const Preconditioner pre = pip_preconditioner(psi);
  if (pre.source_rank < psi.rows() || !pre.nu_m) {
    fail(ErrorKind::RankDeficient, "coherence chain needs full row rank, got rank " +
                                       std::to_string(pre.source_rank));
  }
  const double nu = *pre.nu_m;
  const double mu_psi = mutual_coherence_ignoring_null_columns(psi);
  const double mu_ppsi = mutual_coherence_ignoring_null_columns(pre.P * psi);
  const double middle = (nu + mu_psi) / (1.0 + nu * mu_psi);
  CheckReport rep{"coherence-chain"};
  rep.record(middle - mu_ppsi);
  rep.record(nu + mu_psi - middle);
  return rep;
}

// ---------------------------------------------------------------------------
// Instance families used by `check all`

namespace detail {

inline Vector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

inline Matrix random_unit_columns(Index m, Index n, std::uint64_t seed) {
  return normalize_columns(gen_gaussian_matrix(m, n, seed));
}

inline std::vector<Index> random_subset(Index n, Index k, std::mt19937_64& rng) {
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

}  // namespace detail

inline CheckReport wielandt_family(std::uint64_t seed, int pairs = 1000) {
  std::mt19937_64 rng(derive_seed(seed, "family-wielandt", 0, 0));
  Matrix b(5, 5);
  for (Index j = 0; j < 5; ++j) b.col(j) = detail::random_vector(5, rng);
  const Matrix a = b.transpose() * b + 0.1 * Matrix::Identity(5, 5);
  CheckReport rep{"wielandt"};
  for (int t = 0; t < pairs; ++t) {
    const Vector u = detail::random_vector(5, rng);
    const Vector v = t % 10 == 0 ? Vector(u) : detail::random_vector(5, rng);
    rep.merge(check_wielandt(a, u, v));
  }
  return rep;
}

inline CheckReport cross_gram_family(std::uint64_t seed, int pairs = 100) {
  const Matrix phi = detail::random_unit_columns(10, 20, derive_seed(seed, "family-cross-gram", 0, 0));
  std::mt19937_64 rng(derive_seed(seed, "family-cross-gram", 1, 0));
  std::uniform_int_distribution<Index> size(1, 5);
  CheckReport rep{"cross-gram"};
  for (int t = 0; t < pairs; ++t) {
    const Index a = size(rng), b = size(rng);
    const std::vector<Index> pick = detail::random_subset(20, a + b, rng);
    const IndexSet i1(std::vector<Index>(pick.begin(), pick.begin() + a));
    const IndexSet i2(std::vector<Index>(pick.begin() + a, pick.end()));
    rep.merge(check_cross_gram_bound(phi, i1, i2));
  }
  return rep;
}

namespace detail {

inline void projection_sweep(const Matrix& phi, CheckReport& rep) {
  for (Index k = 0; k <= 3; ++k) {
    const double delta = brute_force_rip_constant(phi, k + 1);
    auto visit = [&](const std::vector<Index>& idx) {
      const IndexSet s(idx);
      for (Index i = 0; i < phi.cols(); ++i)
        if (!s.contains(i)) rep.merge(check_projection_bound(phi, s, i, delta));
    };
    if (k == 0) {
      visit({});
    } else {
      for_each_subset(phi.cols(), k, visit);
    }
  }
}

}  // namespace detail

/// Every S with |S| <= 3 and every i outside S, on an 8x12 low-coherence frame
/// (delta_4 < 1) and on an 8x12 Gaussian draw, where only the small supports
/// meet the delta < 1 precondition and the rest are counted as skipped.
inline CheckReport projection_family(std::uint64_t seed) {
  CheckReport rep{"projection-bound"};
  detail::projection_sweep(gen_low_coherence_frame(8, 4, derive_seed(seed, "family-projection", 0, 0)), rep);
  detail::projection_sweep(detail::random_unit_columns(8, 12, derive_seed(seed, "family-projection", 1, 0)), rep);
  return rep;
}

/// |S| = 3 on low-coherence 8x12 frames and |S| = 2 on 8x12 Gaussian draws.
inline CheckReport rip_family(std::uint64_t seed, int draws = 100) {
  std::mt19937_64 rng(derive_seed(seed, "family-rip", 0, 0));
  CheckReport rep{"rip-consequences"};
  for (int t = 0; t < draws; ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    const Matrix frame = gen_low_coherence_frame(8, 4, derive_seed(seed, "family-rip-frame", 0, ut));
    rep.merge(check_rip_consequences(frame, IndexSet(detail::random_subset(12, 3, rng)),
                                     detail::random_vector(3, rng)));
    const Matrix gauss = detail::random_unit_columns(8, 12, derive_seed(seed, "family-rip-gauss", 0, ut));
    rep.merge(check_rip_consequences(gauss, IndexSet(detail::random_subset(12, 2, rng)),
                                     detail::random_vector(2, rng)));
  }
  return rep;
}

inline CheckReport coherence_chain_family(std::uint64_t seed, int draws = 100, unsigned workers = 1) {
  std::vector<CheckReport> parts(static_cast<std::size_t>(draws));
  parallel_for(parts.size(), workers, [&](std::size_t t) {
    parts[t] = check_coherence_chain(gen_gaussian_matrix(32, 64, derive_seed(seed, "family-chain", 0, t)));
  });
  CheckReport rep{"coherence-chain"};
  for (const auto& p : parts) rep.merge(p);
  return rep;
}

inline CheckReport singular_family(std::uint64_t seed, unsigned workers = 1) {
  CheckReport rep = check_singular_concentration(64, 256, 0.5, 1000, seed, workers);
  rep.merge(check_singular_concentration(64, 256, 0.0, 100, seed, workers));
  return rep;
}

inline CheckReport parseval_family(std::uint64_t seed, int draws = 100) {
  // Margin is 1e-8 minus the deviation, so the allowance is already in the margin.
  CheckReport rep{"parseval-idempotence", 0, 0, 0, std::numeric_limits<double>::infinity(), 0.0};
  for (int t = 0; t < draws; ++t) {
    const Matrix psi = gen_gaussian_matrix(32, 64, derive_seed(seed, "family-parseval", 0, static_cast<std::uint64_t>(t)));
    const Preconditioner pre = pip_preconditioner(psi);
    rep.record(1e-8 - parseval_check(pre.P * psi, 1e-8).max_deviation);
    rep.record(1e-8 - pip_idempotence_check(psi, 1e-8).max_deviation);
  }
  return rep;
}

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"wielandt",         "cross-gram",
                                              "projection-bound", "rip-consequences",
                                              "coherence-chain",  "singular-concentration",
                                              "parseval-idempotence"};
  return names;
}

inline CheckReport run_check_family(const std::string& name, std::uint64_t seed, unsigned workers = 1) {
  if (name == "wielandt") return wielandt_family(seed);
  if (name == "cross-gram") return cross_gram_family(seed);
  if (name == "projection-bound") return projection_family(seed);
  if (name == "rip-consequences") return rip_family(seed);
  if (name == "coherence-chain") return coherence_chain_family(seed, 100, workers);
  if (name == "singular-concentration") return singular_family(seed, workers);
  if (name == "parseval-idempotence") return parseval_family(seed);
  fail(ErrorKind::Validation, "unknown check '" + name + "'");
}

}  // namespace pmols
