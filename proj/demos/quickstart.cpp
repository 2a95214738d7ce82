// Recover a 20-sparse vector from 128 Gaussian samples with and without
// pseudo-inverse preconditioning.

#include <cstdio>

#include "pmols/pmols.hpp"

int main() {
  using namespace pmols;
  const Index m = 128, n = 256, K = 20;
  const Matrix psi = gen_gaussian_matrix(m, n, 11);
  const SparseSignal x = gen_sparse_signal(n, K, SignalKind::Gaussian, 12);
  const Vector y0 = psi * x.values;

  std::printf("mu(Psi)   = %.4f\n", mutual_coherence(psi));
  const Preconditioner pre = pip_preconditioner(psi);
  std::printf("mu(P Psi) = %.4f\n", mutual_coherence(pre.P * psi));

  const SolverParams params{K, 3, std::nullopt, sample_limited_iteration_cap(K, 3, m)};
  const RecoveryResult plain = mols(psi, y0, params);
  const RecoveryResult pre_res = pmols::pmols(psi, y0, params, PreconditionMode::pip());
  std::printf("mOLS  relative error %.3g after %ld iterations\n", relative_error(plain.x_hat, x.values),
              static_cast<long>(plain.iterations));
  std::printf("PmOLS relative error %.3g after %ld iterations\n", relative_error(pre_res.x_hat, x.values),
              static_cast<long>(pre_res.iterations));
  std::printf("support recovered: %s\n", pre_res.T_hat == x.support ? "yes" : "no");
}
