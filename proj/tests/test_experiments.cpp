#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "pmols/experiments.hpp"

using namespace pmols;

namespace {

ExperimentConfig small_frequency_config() {
  ExperimentConfig c;
  c.n = 64;
  c.m = 32;
  c.Ks = {1, 4, 8};
  c.s = 1;
  c.trials = 20;
  c.seed = 11;
  c.methods = {{Method::MOLS}, {Method::PMOLS}};
  return c;
}

}  // namespace

TEST(Seeds, DeriveSeedSeparatesStreamsAndTrials) {
  EXPECT_EQ(derive_seed(1, "a", 2, 3), derive_seed(1, "a", 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t master : {0u, 1u})
    for (const char* stream : {"a", "b"})
      for (std::uint64_t point : {0u, 1u})
        for (std::uint64_t trial = 0; trial < 50; ++trial) seen.insert(derive_seed(master, stream, point, trial));
  EXPECT_EQ(seen.size(), 400u);
}

TEST(GaussianMatrix, DeterministicPerSeed) {
  EXPECT_EQ(gen_gaussian_matrix(5, 7, 3), gen_gaussian_matrix(5, 7, 3));
  EXPECT_NE(gen_gaussian_matrix(5, 7, 3), gen_gaussian_matrix(5, 7, 4));
}

TEST(GaussianMatrix, MomentsMatchVarianceOneOverM) {
  const Index m = 128, n = 256;
  const int draws = 128;
  std::vector<double> entries;
  entries.reserve(static_cast<std::size_t>(m * n * draws));
  for (int d = 0; d < draws; ++d) {
    const Matrix a = gen_gaussian_matrix(m, n, static_cast<std::uint64_t>(d) + 1000);
    entries.insert(entries.end(), a.data(), a.data() + a.size());
  }
  // Four standard errors of the mean for N(0, 1/m).
  const double se = std::sqrt(1.0 / m / static_cast<double>(entries.size()));
  EXPECT_LE(std::abs(oracle::mean(entries)), 4.0 * se);
  EXPECT_NEAR(oracle::sample_variance(entries), 1.0 / m, 0.05 / m);
}

TEST(LowCoherenceFrame, CoherenceIsOneOverRootM) {
  for (Index m : {8, 16, 64}) {
    const Matrix f = gen_low_coherence_frame(m, m / 2, 3);
    EXPECT_EQ(f.rows(), m);
    EXPECT_EQ(f.cols(), m + m / 2);
    EXPECT_NEAR(oracle::coherence(f), 1.0 / std::sqrt(static_cast<double>(m)), 1e-12);
    for (Index j = 0; j < f.cols(); ++j) EXPECT_NEAR(f.col(j).norm(), 1.0, 1e-12);
  }
}

TEST(SparseSignal, KindsAndSupport) {
  for (SignalKind kind : {SignalKind::Gaussian, SignalKind::PAM2, SignalKind::TwoValued}) {
    const SparseSignal x = gen_sparse_signal(100, 12, kind, 5);
    EXPECT_EQ(x.support.size(), 12);
    Index nonzero = 0;
    for (Index i = 0; i < 100; ++i) {
      if (x.values(i) == 0.0) {
        EXPECT_FALSE(x.support.contains(i));
        continue;
      }
      ++nonzero;
      EXPECT_TRUE(x.support.contains(i));
      if (kind == SignalKind::PAM2) {
        const double v = x.values(i);
        EXPECT_TRUE(v == -3 || v == -1 || v == 1 || v == 3) << v;
      }
      if (kind == SignalKind::TwoValued) EXPECT_EQ(x.values(i), 255.0);
    }
    EXPECT_EQ(nonzero, 12);
  }
  EXPECT_EQ(gen_sparse_signal(10, 3, SignalKind::PAM2, 9).values, gen_sparse_signal(10, 3, SignalKind::PAM2, 9).values);
  EXPECT_EQ(parse_signal_kind("pam2"), SignalKind::PAM2);
  expect_error(ErrorKind::Validation, [] { parse_signal_kind("ternary"); });
}

TEST(Noise, HugeSnrIsNegligible) {
  const Vector y = gen_gaussian_matrix(64, 1, 2).col(0);
  const Vector noisy = add_noise(y, 300.0, 10, 64, 3);
  EXPECT_LE((noisy - y).norm() / y.norm(), 1e-10);
}

TEST(Noise, VarianceMatchesSnrFormula) {
  const Index m = 100000, K = 20;
  const double snr = 10.0;
  const Vector y = Vector::Zero(m);
  const Vector e = add_noise(y, snr, K, m, 4);
  const std::vector<double> v(e.data(), e.data() + e.size());
  const double expected = static_cast<double>(K) / m * std::pow(10.0, -snr / 10.0);
  EXPECT_NEAR(oracle::sample_variance(v), expected, 0.05 * expected);
}

TEST(ParallelFor, ResultsIndependentOfWorkers) {
  auto fill = [](unsigned workers) {
    std::vector<double> out(97);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      out[i] = gen_gaussian_matrix(3, 3, i).sum();
    });
    return out;
  };
  EXPECT_EQ(fill(1), fill(4));
}

TEST(ParallelFor, PropagatesExceptions) {
  expect_error(ErrorKind::Validation, [] {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7) fail(ErrorKind::Validation, "boom");
    });
  });
}

TEST(Methods, NamesRoundTrip) {
  for (const char* name : {"mols", "pmols", "omp", "gi"}) EXPECT_EQ(parse_method(name).name(), name);
  EXPECT_EQ((MethodSpec{Method::ModifiedPMOLS, 0.1}).name(), "modified-pmols");
  expect_error(ErrorKind::Validation, [] { parse_method("bp"); });
}

TEST(ConfigHash, SensitiveToIdentityButNotWorkers) {
  ExperimentConfig a = small_frequency_config();
  ExperimentConfig b = a;
  b.workers = 8;
  EXPECT_EQ(config_hash(a, "x"), config_hash(b, "x"));
  EXPECT_EQ(config_hash(a, "x").size(), 16u);
  b.seed += 1;
  EXPECT_NE(config_hash(a, "x"), config_hash(b, "x"));
  EXPECT_NE(config_hash(a, "x"), config_hash(a, "y"));
}

TEST(CoherenceSweep, SkipsFullRateAndDecreases) {
  ExperimentConfig c;
  c.n = 64;
  c.rates = {0.25, 0.5, 0.75, 1.0};
  c.trials = 10;
  c.seed = 3;
  const auto r = coherence_sweep(c);
  ASSERT_EQ(r.rows.size(), 3u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_NE(r.skipped[0].find("rate 1"), std::string::npos) << r.skipped[0];
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.m, std::lround(row.rate * 64));
    EXPECT_LT(row.mean_mu_ppsi, row.mean_mu_psi);
  }
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_LT(r.rows[i].mean_mu_ppsi, r.rows[i - 1].mean_mu_ppsi);
  }
}

TEST(CoherenceSweep, CsvRowsCarryHash) {
  ExperimentConfig c;
  c.n = 32;
  c.rates = {0.5};
  c.trials = 3;
  const auto r = coherence_sweep(c);
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "rate,m,mean_mu_psi,mean_mu_ppsi,trials,config_hash");
  EXPECT_NE(csv.find("," + r.config_hash + "\n"), std::string::npos);
}

TEST(RecoveryFrequency, SingleSparseSignalAlwaysRecovered) {
  ExperimentConfig c = small_frequency_config();
  c.Ks = {1};
  const auto r = recovery_frequency(c);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) EXPECT_EQ(row.frequency, 1.0) << row.method;
  EXPECT_EQ(r.records.size(), 40u);
}

TEST(RecoveryFrequency, SkipsPointsBelowBlockSize) {
  ExperimentConfig c = small_frequency_config();
  c.s = 3;
  c.Ks = {2, 6};
  const auto r = recovery_frequency(c);
  EXPECT_EQ(r.skipped.size(), 1u);
  for (const auto& row : r.rows) EXPECT_EQ(row.K, 6);
}

TEST(RecoveryFrequency, WorkerCountDoesNotChangeResults) {
  ExperimentConfig c = small_frequency_config();
  c.kinds = {SignalKind::Gaussian, SignalKind::TwoValued};
  const std::string one = to_csv(recovery_frequency(c));
  c.workers = 3;
  EXPECT_EQ(to_csv(recovery_frequency(c)), one);
}

TEST(RecoveryFrequency, CriticalSparsity) {
  std::vector<FrequencyRow> rows{{SignalKind::Gaussian, 5, "pmols", 10, 10, 1.0},
                                 {SignalKind::Gaussian, 10, "pmols", 10, 10, 1.0},
                                 {SignalKind::Gaussian, 15, "pmols", 9, 10, 0.9},
                                 {SignalKind::Gaussian, 20, "pmols", 10, 10, 1.0},
                                 {SignalKind::Gaussian, 5, "mols", 3, 10, 0.3}};
  EXPECT_EQ(critical_sparsity(rows, SignalKind::Gaussian, "pmols"), Index{10});
  EXPECT_FALSE(critical_sparsity(rows, SignalKind::Gaussian, "mols").has_value());
  EXPECT_FALSE(critical_sparsity(rows, SignalKind::PAM2, "pmols").has_value());
}

TEST(NoiseSweep, TinyLambdaMatchesPlainPmolsAtHighSnr) {
  ExperimentConfig c;
  c.n = 64;
  c.m = 32;
  c.Ks = {4};
  c.s = 2;
  c.trials = 20;
  c.seed = 5;
  c.snrs_db = {300.0};
  c.lambdas = {1e-12};
  const auto r = noise_sweep(c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].method, "pmols");
  EXPECT_EQ(r.rows[1].method, "modified-pmols");
  EXPECT_NEAR(r.rows[1].mean_mse, r.rows[0].mean_mse, 1e-8);
  EXPECT_LE(r.rows[0].mean_mse, 1e-8);
}

TEST(NoiseSweep, RequiresExactlyOneK) {
  ExperimentConfig c;
  c.Ks = {4, 5};
  c.snrs_db = {10};
  c.lambdas = {0.1};
  expect_error(ErrorKind::Validation, [&] { noise_sweep(c); });
}

TEST(NoiseSweep, MseFallsAsSnrRises) {
  ExperimentConfig c;
  c.n = 64;
  c.m = 32;
  c.Ks = {4};
  c.s = 2;
  c.trials = 30;
  c.snrs_db = {10.0, 40.0};
  c.lambdas = {0.01};
  const auto r = noise_sweep(c);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_LT(r.rows[2].mean_mse, r.rows[0].mean_mse);
  EXPECT_LT(r.rows[3].mean_mse, r.rows[1].mean_mse);
  for (const auto& row : r.rows) EXPECT_GT(row.se_mse, 0.0);
}

TEST(Imaging, ZeroObjectIsReconstructedExactly) {
  ExperimentConfig c;
  c.m = 20;
  c.s = 3;
  c.objects = {ObjectImage(4, 4, std::vector<double>(16, 0.0))};
  c.object_names = {"blank"};
  c.methods = {{Method::GI}, {Method::MOLS}, {Method::PMOLS}};
  const auto r = imaging_experiment(c);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) EXPECT_TRUE(row.psnr.identical()) << row.method;
  EXPECT_NE(to_csv(r).find("blank,20,pmols,identical,"), std::string::npos);
}

TEST(Imaging, PmolsRecoversSparseObject) {
  ExperimentConfig c;
  c.m = 300;
  c.s = 3;
  c.objects = {synthetic_digit_seven()};
  c.object_names = {"digit7"};
  c.methods = {{Method::GI}, {Method::PMOLS}};
  const auto r = imaging_experiment(c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_TRUE(r.rows[1].psnr.at_least(40.0));
  EXPECT_TRUE(r.rows[1].psnr >= r.rows[0].psnr);
}

TEST(Determinism, SameConfigGivesByteIdenticalCsv) {
  ExperimentConfig c = small_frequency_config();
  EXPECT_EQ(to_csv(recovery_frequency(c)), to_csv(recovery_frequency(c)));
  ExperimentConfig n;
  n.n = 32;
  n.m = 16;
  n.Ks = {3};
  n.s = 1;
  n.trials = 5;
  n.snrs_db = {20};
  n.lambdas = {0.1};
  EXPECT_EQ(to_csv(noise_sweep(n)), to_csv(noise_sweep(n)));
}
