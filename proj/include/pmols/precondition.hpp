#pragma once

// Pseudo-inverse preconditioning (PIP) and its ridge-regularised variant,
// plus the quantities used to reason about them: nu_m, the coherence
// probability bound, and the projector / idempotence properties of P*Psi.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "pmols/errors.hpp"
#include "pmols/matrix_core.hpp"

namespace pmols {

enum class PreconditionMethod { PIP, ModifiedPIP };

/// Which closed form of the Frobenius-optimal preconditioner applies.
enum class PipCase {
  FullRowRank,     // r = m: P = Psi^T (Psi Psi^T)^-1
  FullColumnRank,  // r = n: P = (Psi^T Psi)^-1 Psi^T
  RankDeficient,   // r < min(m, n): P = V diag(1/sigma_1..1/sigma_r, 0..) U^T
};

struct Preconditioner {
  Matrix P;  // n x m for an m x n source
  PreconditionMethod method = PreconditionMethod::PIP;
  double lambda = 0.0;  // ModifiedPIP only
  Index source_rank = 0;
  PipCase rank_case = PipCase::FullRowRank;
  // (sigma_1^2 - sigma_m^2) / (sigma_1^2 + sigma_m^2); only for PIP with m <= n and sigma_m > 0.
  std::optional<double> nu_m;
};

/// The bundle a recovery algorithm runs on: Phi = P Psi and y = P y0 when
/// preconditioned, otherwise Phi = Psi and y = y0.
struct SensingSystem {
  Matrix Psi;
  std::optional<Preconditioner> preconditioner;
  Matrix Phi;
  Vector y0;
  Vector y;
};

inline double nu_from_extreme_singular_values(double sigma_max, double sigma_min) {
  const double a = sigma_max * sigma_max;
  const double b = sigma_min * sigma_min;
  return (a - b) / (a + b);
}

inline Preconditioner pip_preconditioner(const Matrix& psi, double rank_tol = kDefaultRankTol) {
  const SvdResult dec = svd(psi, rank_tol);
  const Index r = dec.numerical_rank;
  if (r == 0) fail(ErrorKind::DegenerateInput, "cannot precondition the zero matrix");

  const Index m = psi.rows();
  const Index n = psi.cols();
  Preconditioner out;
  out.method = PreconditionMethod::PIP;
  out.source_rank = r;
  if (r == m) {
    out.rank_case = PipCase::FullRowRank;
  } else if (r == n) {
    out.rank_case = PipCase::FullColumnRank;
  } else {
    out.rank_case = PipCase::RankDeficient;
  }
  // All three closed forms equal V_r diag(1/sigma) U_r^T.
  const Vector inv_sigma = dec.singular_values.head(r).cwiseInverse();
  out.P = dec.V.leftCols(r) * inv_sigma.asDiagonal() * dec.U.leftCols(r).transpose();
  if (m <= n && r == m) {
    out.nu_m = nu_from_extreme_singular_values(dec.singular_values(0), dec.singular_values(m - 1));
  }
  return out;
}

/// P_lambda = Psi^T (Psi Psi^T + lambda I)^-1, evaluated as V diag(sigma/(sigma^2+lambda)) U^T.
inline Preconditioner modified_pip(const Matrix& psi, double lambda,
                                   double rank_tol = kDefaultRankTol) {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::Domain,
          "lambda must be a finite nonnegative number");
  require(psi.rows() <= psi.cols(), ErrorKind::Dimension,
          "modified PIP needs m <= n, got " + shape_string(psi));
  const SvdResult dec = svd(psi, rank_tol);
  const Index m = psi.rows();
  if (lambda == 0.0 && dec.numerical_rank < m) {
    fail(ErrorKind::Singularity,
         "Psi Psi^T is singular (rank " + std::to_string(dec.numerical_rank) + " < " +
             std::to_string(m) + "); use pip_preconditioner for rank-deficient input");
  }
  Vector gain(m);
  for (Index i = 0; i < m; ++i) {
    const double s = dec.singular_values(i);
    const double denom = s * s + lambda;
    gain(i) = denom > 0.0 ? s / denom : 0.0;
  }
  Preconditioner out;
  out.method = PreconditionMethod::ModifiedPIP;
  out.lambda = lambda;
  out.source_rank = dec.numerical_rank;
  out.rank_case = dec.numerical_rank == m ? PipCase::FullRowRank : PipCase::RankDeficient;
  out.P = dec.V * gain.asDiagonal() * dec.U.transpose();
  return out;
}

inline SensingSystem apply(const Preconditioner& pre, const Matrix& psi, const Vector& y0) {
  require(pre.P.cols() == psi.rows(), ErrorKind::Dimension,
          "preconditioner " + shape_string(pre.P) + " cannot multiply Psi " + shape_string(psi));
  require(pre.P.rows() == psi.cols(), ErrorKind::Dimension,
          "preconditioner rows must equal the column count of Psi");
  require(y0.size() == psi.rows(), ErrorKind::Dimension,
          "sample length " + std::to_string(y0.size()) + " does not match " +
              std::to_string(psi.rows()) + " rows of Psi");
  require_finite(y0, "samples");
  SensingSystem sys;
  sys.Psi = psi;
  sys.preconditioner = pre;
  sys.Phi = pre.P * psi;
  sys.y0 = y0;
  sys.y = pre.P * y0;
  return sys;
}

inline SensingSystem unpreconditioned(const Matrix& psi, const Vector& y0) {
  require(y0.size() == psi.rows(), ErrorKind::Dimension, "sample length does not match Psi");
  require_finite(psi, "Psi");
  require_finite(y0, "samples");
  return SensingSystem{psi, std::nullopt, psi, y0, y0};
}

struct ProbabilityBound {
  double raw = 0.0;      // may be negative, i.e. vacuous
  double clamped = 0.0;  // raw clipped to [0, 1]
};

/// Lower bound on Pr(mu(P Psi) <= eta) for Gaussian Psi: 1 - 3 n^2 exp(-m eta^2 / 72).
inline ProbabilityBound coherence_bound_probability(long long n, long long m, double eta) {
  require(m > 0 && m < n, ErrorKind::Domain, "coherence bound needs 0 < m < n");
  require(eta > 0.0 && eta < 1.0, ErrorKind::Domain, "eta must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  const double raw =
      1.0 - 3.0 * nn * nn * std::exp(-static_cast<double>(m) * eta * eta / 72.0);
  return {raw, std::clamp(raw, 0.0, 1.0)};
}

struct ParsevalReport {
  bool is_parseval_projector = false;
  double max_deviation = 0.0;
};

/// Checks Phi^T Phi = Phi and Phi = Phi^T entrywise within tol.
inline ParsevalReport parseval_check(const Matrix& phi, double tol) {
  require(phi.rows() == phi.cols(), ErrorKind::Dimension,
          "Parseval check needs a square matrix, got " + shape_string(phi));
  require(tol > 0.0, ErrorKind::Domain, "tolerance must be positive");
  const double gram_dev = max_abs(phi.transpose() * phi - phi);
  const double sym_dev = max_abs(phi - phi.transpose());
  const double dev = std::max(gram_dev, sym_dev);
  return {dev <= tol, dev};
}

struct IdempotenceReport {
  bool passed = false;
  double max_deviation = 0.0;
};

/// Preconditions P Psi a second time and measures |P'(P Psi) - P Psi|_max.
inline IdempotenceReport pip_idempotence_check(const Matrix& psi, double tol,
                                               double rank_tol = kDefaultRankTol) {
  require(psi.rows() < psi.cols(), ErrorKind::Dimension, "idempotence check needs m < n");
  const Preconditioner first = pip_preconditioner(psi, rank_tol);
  const Matrix phi = first.P * psi;
  const Preconditioner second = pip_preconditioner(phi, rank_tol);
  const double dev = max_abs(second.P * phi - phi);
  return {dev <= tol, dev};
}

}  // namespace pmols
