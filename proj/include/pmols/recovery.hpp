#pragma once

// Greedy sparse solvers: multiple orthogonal least squares (mOLS), its
// preconditioned form (PmOLS) and the OMP baseline, together with the
// coherence-based recovery condition and the PmOLS success probability.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pmols/errors.hpp"
#include "pmols/matrix_core.hpp"
#include "pmols/precondition.hpp"

namespace pmols {

enum class Termination { ResidualTolerance, IterationCap, RankFailure };

constexpr const char* to_string(Termination t) {
  switch (t) {
    case Termination::ResidualTolerance: return "residual-tolerance";
    case Termination::IterationCap: return "iteration-cap";
    case Termination::RankFailure: return "rank-failure";
  }
  return "unknown";
}

struct SolverParams {
  Index K = 1;  // target sparsity
  Index s = 1;  // indices added per iteration
  std::optional<double> tol;  // absolute residual tolerance; default 1e-6 * |y|
  std::optional<Index> max_iters;  // default floor(min(K, m / K))
};

/// A column of a projected matrix whose norm falls below this fraction of the
/// original column norm is treated as lying in span(Phi_S).
inline constexpr double kDropTol = 1e-12;
inline constexpr double kDefaultRelativeTol = 1e-6;

struct RecoveryResult {
  Vector x_hat;
  IndexSet T_hat;
  std::vector<double> residual_norms;  // |r^0|, |r^1|, ...
  std::vector<std::vector<Index>> selections;  // indices added per iteration, in rank order
  Index iterations = 0;
  Termination termination = Termination::ResidualTolerance;
};

/// The input constraint s <= min{K, m/K} attached to the algorithm.
inline bool satisfies_selection_constraint(Index K, Index s, Index m) {
  return s >= 1 && s <= K && s * K <= m;
}

/// floor(min(K, m/K)), the literal iteration guard.
inline Index default_iteration_cap(Index K, Index m) { return std::min(K, m / K); }

/// min(K, floor(m/s)): up to K iterations as long as s*k columns still fit in m rows.
inline Index sample_limited_iteration_cap(Index K, Index s, Index m) { return std::min(K, m / s); }

namespace detail {

/// The s eligible indices with the largest score; ties go to the lower index.
inline std::vector<Index> top_scores(const Vector& scores, const std::vector<char>& eligible,
                                     Index s) {
  std::vector<Index> candidates;
  candidates.reserve(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i)
    if (eligible[static_cast<std::size_t>(i)]) candidates.push_back(i);
  if (static_cast<Index>(candidates.size()) < s) {
    fail(ErrorKind::Exhaustion, "only " + std::to_string(candidates.size()) +
                                    " admissible columns remain, " + std::to_string(s) +
                                    " requested");
  }
  auto better = [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + s, candidates.end(), better);
  candidates.resize(static_cast<std::size_t>(s));
  return candidates;
}

enum class Rule { ProjectedCorrelation, PlainCorrelation };

/// Columns of Phi projected onto the orthogonal complement of span(Phi_S),
/// maintained as columns are added.
class ProjectedColumns {
 public:
  explicit ProjectedColumns(const Matrix& phi)
      : perp_(phi), norms_(phi.colwise().norm().transpose()), basis_(phi.rows(), 0) {}

  /// Returns false when column j is numerically inside the current span.
  bool add(Index j) {
    Vector q = perp_.col(j);
    if (basis_.cols() > 0) q -= basis_ * (basis_.transpose() * q);
    const double len = q.norm();
    if (!(len > kDropTol * norms_(j)) || !(len > 0.0)) return false;
    q /= len;
    perp_.noalias() -= q * (q.transpose() * perp_);
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + 1);
    basis_.col(basis_.cols() - 1) = q;
    return true;
  }

  double perp_norm(Index j) const { return perp_.col(j).norm(); }
  double original_norm(Index j) const { return norms_(j); }
  Index cols() const { return perp_.cols(); }

 private:
  Matrix perp_;
  Vector norms_;
  Matrix basis_;
};

inline std::vector<Index> select_with(const Matrix& phi, const Vector& r,
                                      const ProjectedColumns& proj, const IndexSet& s_set,
                                      Index s, Rule rule) {
  const Vector corr = phi.transpose() * r;
  Vector scores = Vector::Zero(phi.cols());
  std::vector<char> eligible(static_cast<std::size_t>(phi.cols()), 0);
  for (Index i = 0; i < phi.cols(); ++i) {
    if (s_set.contains(i)) continue;
    const double pn = proj.perp_norm(i);
    if (!(pn > kDropTol * proj.original_norm(i)) || !(pn > 0.0)) continue;
    eligible[static_cast<std::size_t>(i)] = 1;
    scores(i) = rule == Rule::ProjectedCorrelation ? std::abs(corr(i)) / pn : std::abs(corr(i));
  }
  return top_scores(scores, eligible, s);
}

inline void validate(const Matrix& phi, const Vector& y, const SolverParams& p, Index cap,
                     Index sample_count) {
  require(y.size() == phi.rows(), ErrorKind::Dimension,
          "sample length " + std::to_string(y.size()) + " does not match " +
              std::to_string(phi.rows()) + " rows");
  require_finite(phi, "sampling matrix");
  require_finite(y, "samples");
  require(p.K >= 1 && p.K <= phi.cols(), ErrorKind::Validation,
          "K must lie in [1, n], got " + std::to_string(p.K));
  require(p.s >= 1 && p.s <= p.K, ErrorKind::Validation,
          "s must lie in [1, K], got " + std::to_string(p.s));
  require(cap >= 0, ErrorKind::Validation, "max_iters must be nonnegative");
  require(p.s * cap <= std::min(sample_count, phi.cols()), ErrorKind::Validation,
          "s * iterations = " + std::to_string(p.s * cap) +
              " exceeds the number of samples " + std::to_string(sample_count));
  require(!p.tol || (std::isfinite(*p.tol) && *p.tol >= 0.0), ErrorKind::Validation,
          "tol must be finite and nonnegative");
}

/// Keeps the K largest-magnitude entries (ties to the lower index) among `support`.
inline IndexSet prune_to_largest(const Vector& x, const IndexSet& support, Index K) {
  std::vector<Index> order = support.indices();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(x(a)) > std::abs(x(b)); });
  if (static_cast<Index>(order.size()) > K) order.resize(static_cast<std::size_t>(K));
  return IndexSet(std::move(order));
}

inline RecoveryResult greedy_solve(const Matrix& phi, const Vector& y, const SolverParams& p,
                                   Index sample_count, Rule rule) {
  // K is validated below; avoid dividing by it first.
  const Index cap = p.max_iters ? *p.max_iters : (p.K >= 1 ? default_iteration_cap(p.K, sample_count) : 0);
  validate(phi, y, p, cap, sample_count);
  const double tol = p.tol.value_or(kDefaultRelativeTol * y.norm());

  RecoveryResult out;
  out.x_hat = Vector::Zero(phi.cols());
  Vector r = y;
  out.residual_norms.push_back(r.norm());
  IndexSet support;
  Vector coeffs(0);
  ProjectedColumns proj(phi);
  out.termination = Termination::IterationCap;

  while (true) {
    if (r.norm() <= tol) {
      out.termination = Termination::ResidualTolerance;
      break;
    }
    if (out.iterations >= cap) {
      out.termination = Termination::IterationCap;
      break;
    }
    std::vector<Index> chosen;
    IndexSet next;
    Vector next_coeffs;
    try {
      chosen = select_with(phi, r, proj, support, p.s, rule);
      next = support.united(chosen);
      next_coeffs = least_squares_on_support(phi, y, next);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Exhaustion && e.kind() != ErrorKind::RankDeficient) throw;
      out.termination = Termination::RankFailure;
      break;
    }
    bool independent = true;
    for (Index j : chosen) independent = proj.add(j) && independent;
    support = std::move(next);
    coeffs = std::move(next_coeffs);
    r = y - columns(phi, support) * coeffs;
    ++out.iterations;
    out.residual_norms.push_back(r.norm());
    out.selections.push_back(std::move(chosen));
    if (!independent) {
      out.termination = Termination::RankFailure;
      break;
    }
  }

  Vector x_k = Vector::Zero(phi.cols());
  for (Index t = 0; t < support.size(); ++t) x_k(support.indices()[static_cast<std::size_t>(t)]) = coeffs(t);
  out.T_hat = prune_to_largest(x_k, support, p.K);
  if (!out.T_hat.empty()) {
    const Vector final_coeffs = least_squares_on_support(phi, y, out.T_hat);
    for (Index t = 0; t < out.T_hat.size(); ++t)
      out.x_hat(out.T_hat.indices()[static_cast<std::size_t>(t)]) = final_coeffs(t);
  }
  return out;
}

}  // namespace detail

/// Selection step of mOLS: the s indices outside S maximising
/// |<phi_i, r>| / |P_S^perp phi_i|_2. Columns already in span(Phi_S) are skipped.
inline IndexSet select_indices(const SensingSystem& system, const Vector& r, const IndexSet& S,
                               Index s) {
  const Matrix& phi = system.Phi;
  require(r.size() == phi.rows(), ErrorKind::Dimension, "residual length does not match Phi");
  require(s >= 1, ErrorKind::Validation, "s must be positive");
  S.check_bounds(phi.cols());
  require(s <= phi.cols() - S.size(), ErrorKind::Exhaustion,
          "cannot select " + std::to_string(s) + " indices outside a support of size " +
              std::to_string(S.size()));
  detail::ProjectedColumns proj(phi);
  if (!S.empty()) {
    const Matrix sub = columns(phi, S);
    Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    qr.setThreshold(kDefaultRankTol);
    require(qr.rank() == S.size(), ErrorKind::RankDeficient, "Phi_S is not full column rank");
    for (Index j : S) proj.add(j);
  }
  return IndexSet(detail::select_with(phi, r, proj, S, s, detail::Rule::ProjectedCorrelation));
}

/// mOLS on y = Phi x. Rank trouble mid-run ends the loop with termination
/// RankFailure and the best estimate so far.
inline RecoveryResult mols(const Matrix& phi, const Vector& y, const SolverParams& params) {
  return detail::greedy_solve(phi, y, params, phi.rows(), detail::Rule::ProjectedCorrelation);
}

/// OMP baseline: one index per iteration chosen by plain |<phi_i, r>|.
/// The iteration cap defaults to K.
inline RecoveryResult omp(const Matrix& phi, const Vector& y, Index K,
                          std::optional<double> tol = std::nullopt,
                          std::optional<Index> max_iters = std::nullopt) {
  SolverParams p{K, 1, tol, max_iters.value_or(K)};
  return detail::greedy_solve(phi, y, p, phi.rows(), detail::Rule::PlainCorrelation);
}

struct PreconditionMode {
  enum class Kind { None, PIP, ModifiedPIP };
  Kind kind = Kind::PIP;
  double lambda = 0.0;

  static PreconditionMode none() { return {Kind::None, 0.0}; }
  static PreconditionMode pip() { return {Kind::PIP, 0.0}; }
  static PreconditionMode modified(double lambda) { return {Kind::ModifiedPIP, lambda}; }
};

inline SensingSystem build_system(const Matrix& psi, const Vector& y0, PreconditionMode mode,
                                  double rank_tol = kDefaultRankTol) {
  switch (mode.kind) {
    case PreconditionMode::Kind::None: return unpreconditioned(psi, y0);
    case PreconditionMode::Kind::PIP: return apply(pip_preconditioner(psi, rank_tol), psi, y0);
    case PreconditionMode::Kind::ModifiedPIP:
      return apply(modified_pip(psi, mode.lambda, rank_tol), psi, y0);
  }
  fail(ErrorKind::Validation, "unknown precondition mode");
}

/// Preconditions (Psi, y0) and runs mOLS on the result. The default iteration
/// cap is computed from the number of physical samples m = rows(Psi).
inline RecoveryResult pmols(const Matrix& psi, const Vector& y0, const SolverParams& params,
                            PreconditionMode mode = PreconditionMode::pip()) {
  const SensingSystem sys = build_system(psi, y0, mode);
  return detail::greedy_solve(sys.Phi, sys.y, params, psi.rows(),
                              detail::Rule::ProjectedCorrelation);
}

inline double exact_recovery_coherence_threshold(Index K, Index s) {
  require(K >= 1 && s >= 1 && s <= K, ErrorKind::Domain, "need K >= 1 and 1 <= s <= K");
  return 1.0 / static_cast<double>(2 * s * K - 2 * s + 1);
}

/// mu < 1/(2sK - 2s + 1): exact recovery by mOLS on a unit-column matrix.
inline bool satisfies_exact_recovery_condition(double mu, Index K, Index s) {
  require(mu >= 0.0 && mu <= 1.0, ErrorKind::Domain, "coherence must lie in [0, 1]");
  return mu < exact_recovery_coherence_threshold(K, s);
}

/// 1 - 3 n^2 exp(-m / (72 (2Ks - 2s + 1)^2)), raw and clamped.
inline ProbabilityBound recovery_success_probability(long long n, long long m, long long K, long long s) {
  require(m > 0 && m < n, ErrorKind::Domain, "success probability needs 0 < m < n");
  require(K >= 1 && s >= 1 && s <= K && s * K <= m, ErrorKind::Domain,
          "success probability needs 1 <= s <= min{K, m/K}");
  const double q = static_cast<double>(2 * K * s - 2 * s + 1);
  const double nn = static_cast<double>(n);
  const double raw = 1.0 - 3.0 * nn * nn * std::exp(-static_cast<double>(m) / (72.0 * q * q));
  return {raw, std::clamp(raw, 0.0, 1.0)};
}

/// c K^2 ln(n / eps) before rounding.
inline double sample_complexity_real(long long n, long long K, double eps, double c) {
  require(n >= 1 && K >= 0, ErrorKind::Domain, "need n >= 1 and K >= 0");
  require(eps > 0.0 && eps <= 1.0, ErrorKind::Domain, "eps must lie in (0, 1]");
  require(c > 0.0 && std::isfinite(c), ErrorKind::Domain, "c must be positive");
  const double kk = static_cast<double>(K);
  return c * kk * kk * std::log(static_cast<double>(n) / eps);
}

/// ceil(c K^2 ln(n / eps)).
inline long long sample_complexity(long long n, long long K, double eps, double c) {
  return static_cast<long long>(std::ceil(sample_complexity_real(n, K, eps, c)));
}

}  // namespace pmols
