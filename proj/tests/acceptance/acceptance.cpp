// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "pmols/pmols.hpp"

using namespace pmols;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> run;
};

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------

Verdict coherence_reduction() {
  ExperimentConfig c;
  c.n = 256;
  c.rates = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  c.trials = 100;
  c.seed = 2024;
  c.workers = default_workers();
  const auto r = coherence_sweep(c);
  if (r.rows.size() != c.rates.size()) return {false, "missing rows"};
  for (const auto& row : r.rows) {
    if (!(row.mean_mu_ppsi < row.mean_mu_psi)) {
      return {false, "rate " + fmt(row.rate) + ": mu(P Psi) " + fmt(row.mean_mu_ppsi) + " >= mu(Psi) " +
                         fmt(row.mean_mu_psi)};
    }
  }
  const double gap_lo = r.rows.front().mean_mu_psi - r.rows.front().mean_mu_ppsi;
  const double gap_hi = r.rows.back().mean_mu_psi - r.rows.back().mean_mu_ppsi;
  return {gap_hi > gap_lo, "gap at 0.1 = " + fmt(gap_lo) + ", gap at 0.9 = " + fmt(gap_hi)};
}

// Unit-column frames [Q, Q H/sqrt(m)] have mu = 1/sqrt(m); m = 128 gives 0.088 < 1/9,
// which covers the strictest (K, s) = (3, 2) threshold.
Verdict deterministic_recovery() {
  const std::vector<std::pair<Index, Index>> grid{{1, 1}, {2, 1}, {2, 2}, {3, 1}, {3, 2}};
  const Index m = 128, extra = 128;
  int exact = 0, total = 0;
  for (int t = 0; t < 200; ++t) {
    const auto [K, s] = grid[static_cast<std::size_t>(t) % grid.size()];
    const std::uint64_t seed = derive_seed(77, "acceptance-coherence-recovery", 0, static_cast<std::uint64_t>(t));
    const Matrix phi = gen_low_coherence_frame(m, extra, splitmix64(seed ^ 1));
    const double mu = mutual_coherence(phi);
    if (!satisfies_exact_recovery_condition(mu, K, s)) return {false, "instance " + std::to_string(t) + " has mu " + fmt(mu)};
    const SparseSignal x = gen_sparse_signal(phi.cols(), K, SignalKind::Gaussian, splitmix64(seed ^ 2));
    const RecoveryResult r = mols(phi, phi * x.values, SolverParams{K, s, std::nullopt, std::nullopt});
    ++total;
    if (relative_error(r.x_hat, x.values) <= kExactRecoveryTol) ++exact;
  }
  return {exact == total, std::to_string(exact) + "/" + std::to_string(total) + " exact, mu = " +
                              fmt(1.0 / std::sqrt(static_cast<double>(m)))};
}

Verdict frequency_ordering() {
  ExperimentConfig c;
  c.n = 256;
  c.m = 128;
  c.Ks = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
  c.kinds = {SignalKind::Gaussian, SignalKind::PAM2, SignalKind::TwoValued};
  c.s = 3;
  c.trials = 200;
  c.seed = 2024;
  c.methods = {{Method::MOLS}, {Method::PMOLS}};
  c.workers = default_workers();
  const auto r = recovery_frequency(c);
  if (!r.skipped.empty()) return {false, "skipped: " + r.skipped.front()};
  std::ostringstream critical;
  for (SignalKind kind : c.kinds) {
    for (Index K : c.Ks) {
      const FrequencyRow* mo = nullptr;
      const FrequencyRow* pm = nullptr;
      for (const auto& row : r.rows) {
        if (row.kind != kind || row.K != K) continue;
        (row.method == "mols" ? mo : pm) = &row;
      }
      if (!mo || !pm) return {false, "missing row"};
      const std::string where = std::string(to_string(kind)) + " K=" + std::to_string(K);
      if (pm->frequency < mo->frequency - 2.0 * mo->standard_error()) {
        return {false, where + ": pmols " + fmt(pm->frequency) + " < mols " + fmt(mo->frequency) + " - 2 SE"};
      }
      if (K <= 10 && pm->frequency != 1.0) return {false, where + ": pmols frequency " + fmt(pm->frequency)};
    }
    const auto cm = critical_sparsity(r.rows, kind, "mols");
    const auto cp = critical_sparsity(r.rows, kind, "pmols");
    critical << to_string(kind) << " critical K mols=" << (cm ? std::to_string(*cm) : "none")
             << " pmols=" << (cp ? std::to_string(*cp) : "none") << "; ";
  }
  return {true, critical.str()};
}

Verdict parseval_idempotence() {
  double worst_p = 0.0, worst_i = 0.0;
  int failures = 0;
  for (auto [m, n] : std::vector<std::pair<Index, Index>>{{32, 64}, {128, 256}}) {
    for (int t = 0; t < 100; ++t) {
      const Matrix psi =
          gen_gaussian_matrix(m, n, derive_seed(5, "acceptance-parseval", static_cast<std::uint64_t>(m), t));
      const Matrix phi = pip_preconditioner(psi).P * psi;
      const ParsevalReport p = parseval_check(phi, 1e-8);
      const IdempotenceReport i = pip_idempotence_check(psi, 1e-8);
      worst_p = std::max(worst_p, p.max_deviation);
      worst_i = std::max(worst_i, i.max_deviation);
      failures += !p.is_parseval_projector + !i.passed;
    }
  }
  return {failures == 0, "max Parseval deviation " + fmt(worst_p) + ", max idempotence deviation " + fmt(worst_i)};
}

Verdict frobenius_optimality() {
  double worst_gap = 0.0;
  for (auto [m, n] : std::vector<std::pair<Index, Index>>{{16, 48}, {32, 64}, {64, 128}, {128, 256}}) {
    for (int t = 0; t < 5; ++t) {
      const Matrix psi =
          gen_gaussian_matrix(m, n, derive_seed(6, "acceptance-optimality", static_cast<std::uint64_t>(m), t));
      const Preconditioner pre = pip_preconditioner(psi);
      if (pre.rank_case != PipCase::FullRowRank) return {false, "expected a full-row-rank draw"};
      const double d = frobenius_distance_to_identity(pre.P * psi);
      worst_gap = std::max(worst_gap, std::abs(d - std::sqrt(static_cast<double>(n - m))));
    }
  }
  if (worst_gap > 1e-8) return {false, "|PPsi - I|_F misses sqrt(n - m) by " + fmt(worst_gap)};

  const Matrix psi = gen_gaussian_matrix(32, 64, 606);
  const Matrix p = pip_preconditioner(psi).P;
  const double base = frobenius_distance_to_identity(p * psi);
  std::mt19937_64 rng(607);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) {
    Matrix e(p.rows(), p.cols());
    for (Index i = 0; i < e.size(); ++i) e.data()[i] = gauss(rng);
    e /= e.norm();
    worst_margin = std::min(worst_margin, frobenius_distance_to_identity((p + 1e-3 * e) * psi) - base);
  }
  return {worst_margin >= -1e-9,
          "max |d - sqrt(n-m)| = " + fmt(worst_gap) + ", worst perturbation margin " + fmt(worst_margin)};
}

Verdict noise_curve() {
  ExperimentConfig c;
  c.n = 256;
  c.m = 128;
  c.Ks = {50};
  c.s = 3;
  c.trials = 100;
  c.seed = 2024;
  c.snrs_db = {10, 20, 30, 40};
  c.lambdas = {0.001, 0.01, 0.1, 1};
  c.methods = {{Method::PMOLS}};
  c.workers = default_workers();
  const auto r = noise_sweep(c);
  std::ostringstream detail;
  bool pass = true;
  for (double snr : c.snrs_db) {
    const NoiseRow* plain = nullptr;
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = 0.0;
    for (const auto& row : r.rows) {
      if (row.snr_db != snr) continue;
      if (row.method == "pmols") plain = &row;
      if (row.method == "modified-pmols" && row.mean_mse < best) {
        best = row.mean_mse;
        best_lambda = row.lambda;
      }
    }
    if (!plain) return {false, "missing pmols row"};
    const bool ok = best <= plain->mean_mse + 2.0 * plain->se_mse;
    pass = pass && ok;
    detail << fmt(snr) << "dB: pmols " << fmt(plain->mean_mse) << " modified " << fmt(best) << " (lambda "
           << fmt(best_lambda) << ")" << (ok ? "" : " FAILS") << "; ";
  }
  return {pass, detail.str()};
}

Verdict inequality_suite() {
  std::ostringstream detail;
  bool pass = true;
  for (const std::string& name : check_names()) {
    const CheckReport rep = run_check_family(name, 7, default_workers());
    pass = pass && rep.passed() && rep.instances_tested > 0;
    detail << name << " " << rep.violations << "/" << rep.instances_tested << "; ";
  }
  return {pass, detail.str()};
}

Verdict selection_equivalence() {
  std::mt19937_64 rng(808);
  int agree = 0;
  for (int t = 0; t < 100; ++t) {
    const Matrix phi = gen_gaussian_matrix(8, 16, derive_seed(8, "acceptance-selection", 0, static_cast<std::uint64_t>(t)));
    const Vector y = gen_gaussian_matrix(8, 1, derive_seed(8, "acceptance-selection-y", 0, static_cast<std::uint64_t>(t))).col(0);
    const Index support_size = static_cast<Index>(rng() % 4);
    const Index s = 1 + static_cast<Index>(rng() % 3);
    std::vector<Index> all(16);
    for (Index i = 0; i < 16; ++i) all[static_cast<std::size_t>(i)] = i;
    std::shuffle(all.begin(), all.end(), rng);
    const IndexSet S(std::vector<Index>(all.begin(), all.begin() + support_size));
    // The selection works on a residual, which is orthogonal to span(Phi_S).
    const Vector r = project_orthogonal_complement(phi, S, y);
    const IndexSet fast = select_indices(unpreconditioned(phi, r), r, S, s);
    if (fast.indices() == oracle::brute_force_selection(phi, r, S, s)) ++agree;
  }
  return {agree == 100, std::to_string(agree) + "/100 instances agree"};
}

ExperimentConfig imaging_config() {
  ExperimentConfig c;
  c.m = 400;
  c.s = 3;
  c.seed = 2024;
  c.object_names = {"digit3", "digit7", "taichi"};
  c.objects = {synthetic_digit_three(), synthetic_digit_seven(), synthetic_tai_chi()};
  c.methods = {{Method::GI}, {Method::MOLS}, {Method::PMOLS}};
  return c;
}

Verdict imaging_pipeline() {
  const ExperimentConfig c = imaging_config();
  const auto r = imaging_experiment(c);
  std::ostringstream detail;
  bool pass = true;
  for (std::size_t o = 0; o < c.objects.size(); ++o) {
    const std::string& name = c.object_names[o];
    const Index K = c.objects[o].nonzero_count();
    const ImagingRow* gi = nullptr;
    const ImagingRow* pm = nullptr;
    for (const auto& row : r.rows) {
      if (row.object != name) continue;
      if (row.method == "gi") gi = &row;
      if (row.method == "pmols") pm = &row;
    }
    if (!gi || !pm) return {false, "missing row for " + name};
    const bool ok = (pm->psnr >= gi->psnr) && (K > 40 || pm->psnr.at_least(40.0));
    pass = pass && ok;
    auto show = [](const Psnr& p) { return p.identical() ? std::string("identical") : format_double(*p.db); };
    detail << name << " K=" << K << " gi " << show(gi->psnr) << " pmols " << show(pm->psnr) << "; ";
  }
  return {pass, detail.str()};
}

Verdict determinism() {
  int mismatches = 0;
  auto same = [&](const std::string& a, const std::string& b) { mismatches += a != b; };

  ExperimentConfig coh;
  coh.n = 128;
  coh.rates = {0.25, 0.5, 0.75};
  coh.trials = 20;
  coh.seed = 9;
  same(to_csv(coherence_sweep(coh)), to_csv(coherence_sweep(coh)));

  ExperimentConfig freq;
  freq.n = 128;
  freq.m = 64;
  freq.Ks = {3, 9, 15};
  freq.kinds = {SignalKind::Gaussian, SignalKind::PAM2, SignalKind::TwoValued};
  freq.trials = 20;
  freq.seed = 9;
  freq.methods = {{Method::MOLS}, {Method::PMOLS}, {Method::OMP}};
  const std::string freq_csv = to_csv(recovery_frequency(freq));
  same(freq_csv, to_csv(recovery_frequency(freq)));
  freq.workers = 4;
  same(freq_csv, to_csv(recovery_frequency(freq)));

  ExperimentConfig noise;
  noise.n = 128;
  noise.m = 64;
  noise.Ks = {10};
  noise.trials = 20;
  noise.seed = 9;
  noise.snrs_db = {10, 30};
  noise.lambdas = {0.01, 1};
  const std::string noise_csv = to_csv(noise_sweep(noise));
  same(noise_csv, to_csv(noise_sweep(noise)));
  noise.workers = 3;
  same(noise_csv, to_csv(noise_sweep(noise)));

  const ExperimentConfig img = imaging_config();
  same(to_csv(imaging_experiment(img)), to_csv(imaging_experiment(img)));

  std::vector<CheckReport> a, b;
  for (const std::string& name : {std::string("wielandt"), std::string("coherence-chain")}) {
    a.push_back(run_check_family(name, 9));
    b.push_back(run_check_family(name, 9, 2));
  }
  same(to_csv(a), to_csv(b));
  return {mismatches == 0, std::to_string(mismatches) + " mismatching reruns out of 8"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "coherence reduction", 120, coherence_reduction},
      {2, "deterministic mOLS recovery under the coherence condition", 60, deterministic_recovery},
      {3, "recovery-frequency ordering", 900, frequency_ordering},
      {4, "Parseval and idempotence", 60, parseval_idempotence},
      {5, "Frobenius optimality of PIP", 60, frobenius_optimality},
      {6, "modified PIP noise curve", 600, noise_curve},
      {7, "inequality check suite", 180, inequality_suite},
      {8, "selection-rule equivalence", 60, selection_equivalence},
      {9, "imaging pipeline", 120, imaging_pipeline},
      {10, "determinism", 600, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      v.pass = false;
      v.detail += " [over the " + fmt(c.budget_seconds) + " s budget]";
    }
    failed += !v.pass;
    std::printf("%s criterion %d: %s (%.1f s) %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
