#pragma once

// Seeded Monte Carlo harness: Gaussian sensing matrices, sparse test
// signals, noise, and the coherence / recovery-frequency / noise / imaging
// sweeps. Every sweep is deterministic in (config, seed) and independent of
// the worker count; results serialise to CSV with a config hash per row.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "pmols/errors.hpp"
#include "pmols/imaging.hpp"
#include "pmols/matrix_core.hpp"
#include "pmols/precondition.hpp"
#include "pmols/recovery.hpp"

namespace pmols {

// ---------------------------------------------------------------------------
// Seeds and random generation

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based seed for one trial at one grid point. The point key is the
/// grid value itself (m, K, SNR...), not its position, so adding points to a
/// grid leaves existing points' seeds unchanged.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t point_key, std::uint64_t trial) {
  std::uint64_t h = splitmix64(master ^ fnv1a(stream));
  h = splitmix64(h ^ splitmix64(point_key));
  return splitmix64(h ^ splitmix64(trial + 0x5851F42D4C957F2DULL));
}

/// Entries i.i.d. N(0, 1/m).
inline Matrix gen_gaussian_matrix(Index m, Index n, std::uint64_t seed) {
  require(m >= 1 && n >= 1, ErrorKind::Domain, "matrix dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = dist(rng);
  return a;
}

/// Sylvester Hadamard matrix of order n (a power of two), entries +-1.
inline Matrix sylvester_hadamard(Index n) {
  require(n >= 1 && (n & (n - 1)) == 0, ErrorKind::Domain, "Hadamard order must be a power of two");
  Matrix h = Matrix::Ones(1, 1);
  while (h.rows() < n) {
    const Index k = h.rows();
    Matrix next(2 * k, 2 * k);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

/// Unit-column m x (m + extra) matrix Q [I, H_extra / sqrt(m)] D Pi with Q a random
/// rotation, H_extra distinct Hadamard columns, D random signs and Pi a random column
/// order. Its coherence is exactly 1/sqrt(m) (m a power of two, extra <= m).
inline Matrix gen_low_coherence_frame(Index m, Index extra, std::uint64_t seed) {
  require(extra >= 0 && extra <= m, ErrorKind::Domain, "extra columns must lie in [0, m]");
  const Matrix h = sylvester_hadamard(m) / std::sqrt(static_cast<double>(m));
  std::mt19937_64 rng(seed);
  const Matrix g = gen_gaussian_matrix(m, m, rng());
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  std::vector<Index> hcols(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) hcols[static_cast<std::size_t>(i)] = i;
  std::shuffle(hcols.begin(), hcols.end(), rng);
  Matrix base(m, m + extra);
  base.leftCols(m) = Matrix::Identity(m, m);
  for (Index j = 0; j < extra; ++j) base.col(m + j) = h.col(hcols[static_cast<std::size_t>(j)]);
  std::vector<Index> order(static_cast<std::size_t>(m + extra));
  for (Index i = 0; i < m + extra; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution flip(0.5);
  Matrix out(m, m + extra);
  for (Index j = 0; j < m + extra; ++j) {
    out.col(j) = q * base.col(order[static_cast<std::size_t>(j)]);
    if (flip(rng)) out.col(j) = -out.col(j);
  }
  return out;
}

enum class SignalKind { Gaussian, PAM2, TwoValued };

constexpr const char* to_string(SignalKind k) {
  switch (k) {
    case SignalKind::Gaussian: return "gaussian";
    case SignalKind::PAM2: return "pam2";
    case SignalKind::TwoValued: return "two-valued";
  }
  return "unknown";
}

inline SignalKind parse_signal_kind(std::string_view s) {
  if (s == "gaussian") return SignalKind::Gaussian;
  if (s == "pam2" || s == "pam") return SignalKind::PAM2;
  if (s == "two-valued" || s == "twovalued") return SignalKind::TwoValued;
  fail(ErrorKind::Validation, "unknown signal kind '" + std::string(s) + "'");
}

struct SparseSignal {
  Vector values;
  IndexSet support;
  Index K = 0;

  Index n() const { return values.size(); }
};

/// Exactly K nonzeros on a uniformly random support.
inline SparseSignal gen_sparse_signal(Index n, Index K, SignalKind kind, std::uint64_t seed) {
  require(n >= 1, ErrorKind::Domain, "signal length must be positive");
  require(K >= 0 && K <= n, ErrorKind::Domain,
          "sparsity " + std::to_string(K) + " exceeds length " + std::to_string(n));
  std::mt19937_64 rng(seed);
  std::vector<Index> pool(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < K; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(K));

  SparseSignal out{Vector::Zero(n), IndexSet(pool), K};
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 3);
  static constexpr double kPam[4] = {-3.0, -1.0, 1.0, 3.0};
  // Draw values in support order so the signal depends only on the seed.
  for (Index i : pool) {
    double v = 0.0;
    switch (kind) {
      case SignalKind::Gaussian:
        do v = gauss(rng); while (v == 0.0);
        break;
      case SignalKind::PAM2: v = kPam[level(rng)]; break;
      case SignalKind::TwoValued: v = 255.0; break;
    }
    out.values(i) = v;
  }
  return out;
}

/// y + v with v_i i.i.d. N(0, (K/m) 10^(-SNR/10)).
inline Vector add_noise(const Vector& y, double snr_db, Index K, Index m, std::uint64_t seed) {
  require(std::isfinite(snr_db), ErrorKind::Domain, "SNR must be finite");
  require(m >= 1 && K >= 0, ErrorKind::Domain, "need m >= 1 and K >= 0");
  const double variance = static_cast<double>(K) / static_cast<double>(m) * std::pow(10.0, -snr_db / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  Vector out = y;
  for (Index i = 0; i < out.size(); ++i) out(i) += dist(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Parallel execution

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// results into slot i, so the output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Configuration

enum class Method { MOLS, PMOLS, OMP, GI, ModifiedPMOLS };

struct MethodSpec {
  Method method = Method::PMOLS;
  double lambda = 0.0;  // ModifiedPMOLS only

  std::string name() const {
    switch (method) {
      case Method::MOLS: return "mols";
      case Method::PMOLS: return "pmols";
      case Method::OMP: return "omp";
      case Method::GI: return "gi";
      case Method::ModifiedPMOLS: return "modified-pmols";
    }
    return "unknown";
  }
};

inline MethodSpec parse_method(std::string_view s) {
  if (s == "mols") return {Method::MOLS};
  if (s == "pmols") return {Method::PMOLS};
  if (s == "omp") return {Method::OMP};
  if (s == "gi") return {Method::GI};
  fail(ErrorKind::Validation, "unknown method '" + std::string(s) + "'");
}

/// Exact recovery: |x_hat - x|_2 <= 1e-6 |x|_2.
inline constexpr double kExactRecoveryTol = 1e-6;
inline constexpr int kDefaultTrials = 500;

struct ExperimentConfig {
  Index n = 256;
  Index m = 128;
  std::vector<double> rates;  // coherence sweep: m = round(rate * n)
  std::vector<Index> Ks;
  std::vector<SignalKind> kinds{SignalKind::Gaussian};
  Index s = 3;
  int trials = kDefaultTrials;
  std::uint64_t seed = 0;
  std::vector<MethodSpec> methods;
  std::vector<double> snrs_db;
  std::vector<double> lambdas;
  // false: max_iters = min(K, floor(m/s)); true: the literal floor(min(K, m/K)) guard.
  bool literal_iteration_cap = false;
  // imaging only
  std::vector<std::string> object_names;
  std::vector<ObjectImage> objects;
  std::optional<double> lift_constant;
  // Not part of the experiment identity.
  unsigned workers = 1;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// FNV-1a of a canonical description of everything that affects results.
inline std::string config_hash(const ExperimentConfig& c, std::string_view experiment) {
  std::ostringstream os;
  os << experiment << "|n=" << c.n << "|m=" << c.m << "|rates=";
  for (double r : c.rates) os << format_double(r) << ',';
  os << "|K=";
  for (Index k : c.Ks) os << k << ',';
  os << "|kinds=";
  for (SignalKind k : c.kinds) os << to_string(k) << ',';
  os << "|s=" << c.s << "|trials=" << c.trials << "|seed=" << c.seed << "|methods=";
  for (const MethodSpec& m : c.methods) os << m.name() << ':' << format_double(m.lambda) << ',';
  os << "|snr=";
  for (double v : c.snrs_db) os << format_double(v) << ',';
  os << "|lambda=";
  for (double v : c.lambdas) os << format_double(v) << ',';
  os << "|literal_cap=" << c.literal_iteration_cap << "|objects=";
  for (std::size_t i = 0; i < c.objects.size(); ++i) {
    os << (i < c.object_names.size() ? c.object_names[i] : std::string("?")) << ':';
    os << std::hex << fnv1a(std::string_view(reinterpret_cast<const char*>(c.objects[i].pixels().data()),
                                             c.objects[i].pixels().size() * sizeof(double)))
       << std::dec << ',';
  }
  os << "|lift=" << (c.lift_constant ? format_double(*c.lift_constant) : std::string("tight"));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

template <typename Row>
struct SweepResult {
  std::string config_hash;
  std::vector<Row> rows;
  std::vector<std::string> skipped;  // one human-readable reason per omitted grid point
};

// ---------------------------------------------------------------------------
// Shared trial machinery

struct TrialRecord {
  std::uint64_t seed = 0;
  std::string method;
  Index K = 0;
  Index m = 0;
  bool success = false;
  double relative_error = 0.0;
  double wall_time = 0.0;  // seconds; never written to CSV
};

inline SolverParams harness_params(const ExperimentConfig& c, Index K, Index m) {
  SolverParams p{K, c.s, std::nullopt, std::nullopt};
  p.max_iters = c.literal_iteration_cap ? default_iteration_cap(K, m) : sample_limited_iteration_cap(K, c.s, m);
  return p;
}

/// Runs one method on (Psi, y0). Solver errors yield nullopt.
inline std::optional<Vector> run_method(const MethodSpec& spec, const Matrix& psi, const Vector& y0,
                                        const SolverParams& params) {
  try {
    switch (spec.method) {
      case Method::MOLS: return mols(psi, y0, params).x_hat;
      case Method::PMOLS: return pmols(psi, y0, params, PreconditionMode::pip()).x_hat;
      case Method::ModifiedPMOLS:
        return pmols(psi, y0, params, PreconditionMode::modified(spec.lambda)).x_hat;
      case Method::OMP: return omp(psi, y0, params.K).x_hat;
      case Method::GI: return gi_correlate(psi, y0);
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  return std::nullopt;
}

inline double relative_error(const Vector& x_hat, const Vector& x) {
  const double denom = x.norm();
  const double diff = (x_hat - x).norm();
  return denom > 0.0 ? diff / denom : diff;
}

// ---------------------------------------------------------------------------
// Coherence sweep

struct CoherenceRow {
  double rate = 0.0;
  Index m = 0;
  double mean_mu_psi = 0.0;
  double mean_mu_ppsi = 0.0;
  int trials = 0;
};

inline SweepResult<CoherenceRow> coherence_sweep(const ExperimentConfig& c) {
  require(c.trials >= 1, ErrorKind::Validation, "trials must be at least 1");
  require(!c.rates.empty(), ErrorKind::Validation, "rate grid is empty");
  require(c.n >= 2, ErrorKind::Validation, "n must be at least 2");
  SweepResult<CoherenceRow> out{config_hash(c, "coherence-sweep"), {}, {}};
  for (double rate : c.rates) {
    require(std::isfinite(rate) && rate > 0.0, ErrorKind::Validation, "sampling rates must be positive");
    const Index m = static_cast<Index>(std::lround(rate * static_cast<double>(c.n)));
    if (m < 1 || m >= c.n) {
      out.skipped.push_back("rate " + format_double(rate) + " gives m = " + std::to_string(m) +
                            "; PIP coherence needs 1 <= m < n = " + std::to_string(c.n));
      continue;
    }
    std::vector<double> mu_psi(static_cast<std::size_t>(c.trials));
    std::vector<double> mu_ppsi(static_cast<std::size_t>(c.trials));
    parallel_for(static_cast<std::size_t>(c.trials), c.workers, [&](std::size_t t) {
      const Matrix psi = gen_gaussian_matrix(m, c.n, derive_seed(c.seed, "coherence", static_cast<std::uint64_t>(m), t));
      const Preconditioner pre = pip_preconditioner(psi);
      mu_psi[t] = mutual_coherence(psi);
      mu_ppsi[t] = mutual_coherence_ignoring_null_columns(pre.P * psi);
    });
    CoherenceRow row{rate, m, 0.0, 0.0, c.trials};
    for (int t = 0; t < c.trials; ++t) {
      row.mean_mu_psi += mu_psi[static_cast<std::size_t>(t)];
      row.mean_mu_ppsi += mu_ppsi[static_cast<std::size_t>(t)];
    }
    row.mean_mu_psi /= c.trials;
    row.mean_mu_ppsi /= c.trials;
    out.rows.push_back(row);
  }
  return out;
}

inline std::string to_csv(const SweepResult<CoherenceRow>& r) {
  std::string s = "rate,m,mean_mu_psi,mean_mu_ppsi,trials,config_hash\n";
  for (const auto& row : r.rows) {
    s += format_double(row.rate) + ',' + std::to_string(row.m) + ',' + format_double(row.mean_mu_psi) +
         ',' + format_double(row.mean_mu_ppsi) + ',' + std::to_string(row.trials) + ',' +
         r.config_hash + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Recovery frequency

struct FrequencyRow {
  SignalKind kind = SignalKind::Gaussian;
  Index K = 0;
  std::string method;
  int successes = 0;
  int trials = 0;
  double frequency = 0.0;

  /// Binomial standard error sqrt(p(1-p)/trials).
  double standard_error() const {
    return trials > 0 ? std::sqrt(frequency * (1.0 - frequency) / trials) : 0.0;
  }
};

struct FrequencyResult : SweepResult<FrequencyRow> {
  std::vector<TrialRecord> records;
};

inline FrequencyResult recovery_frequency(const ExperimentConfig& c) {
  require(c.trials >= 1, ErrorKind::Validation, "trials must be at least 1");
  require(!c.Ks.empty() && !c.methods.empty() && !c.kinds.empty(), ErrorKind::Validation,
          "K grid, method list and signal kinds must be nonempty");
  require(c.m >= 1 && c.n >= 1 && c.s >= 1, ErrorKind::Validation, "need m, n, s >= 1");
  FrequencyResult out;
  out.config_hash = config_hash(c, "recovery-frequency");
  for (SignalKind kind : c.kinds) {
    for (Index K : c.Ks) {
      if (K < 1 || K > c.n) {
        out.skipped.push_back("K = " + std::to_string(K) + " outside [1, n]");
        continue;
      }
      if (c.s > K) {
        out.skipped.push_back("K = " + std::to_string(K) + " is smaller than s = " + std::to_string(c.s));
        continue;
      }
      const SolverParams params = harness_params(c, K, c.m);
      if (params.s * *params.max_iters > c.m) {
        out.skipped.push_back("K = " + std::to_string(K) + ": s * iterations exceeds m");
        continue;
      }
      const std::size_t nm = c.methods.size();
      std::vector<TrialRecord> recs(static_cast<std::size_t>(c.trials) * nm);
      const std::uint64_t point = (static_cast<std::uint64_t>(kind) << 32) | static_cast<std::uint64_t>(K);
      parallel_for(static_cast<std::size_t>(c.trials), c.workers, [&](std::size_t t) {
        const std::uint64_t seed = derive_seed(c.seed, "recovery", point, t);
        const Matrix psi = gen_gaussian_matrix(c.m, c.n, splitmix64(seed ^ 1));
        SparseSignal x = gen_sparse_signal(c.n, K, kind, splitmix64(seed ^ 2));
        if (kind == SignalKind::TwoValued) x.values /= 255.0;
        const Vector y0 = psi * x.values;
        for (std::size_t j = 0; j < nm; ++j) {
          const auto start = std::chrono::steady_clock::now();
          const std::optional<Vector> est = run_method(c.methods[j], psi, y0, params);
          TrialRecord rec;
          rec.seed = seed;
          rec.method = c.methods[j].name();
          rec.K = K;
          rec.m = c.m;
          rec.relative_error = est ? relative_error(*est, x.values) : std::numeric_limits<double>::infinity();
          rec.success = rec.relative_error <= kExactRecoveryTol;
          rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          recs[t * nm + j] = std::move(rec);
        }
      });
      for (std::size_t j = 0; j < nm; ++j) {
        FrequencyRow row{kind, K, c.methods[j].name(), 0, c.trials, 0.0};
        for (int t = 0; t < c.trials; ++t)
          if (recs[static_cast<std::size_t>(t) * nm + j].success) ++row.successes;
        row.frequency = static_cast<double>(row.successes) / c.trials;
        out.rows.push_back(row);
      }
      out.records.insert(out.records.end(), recs.begin(), recs.end());
    }
  }
  return out;
}

inline std::string to_csv(const SweepResult<FrequencyRow>& r) {
  std::string s = "kind,K,method,successes,trials,frequency,config_hash\n";
  for (const auto& row : r.rows) {
    s += std::string(to_string(row.kind)) + ',' + std::to_string(row.K) + ',' + row.method + ',' +
         std::to_string(row.successes) + ',' + std::to_string(row.trials) + ',' +
         format_double(row.frequency) + ',' + r.config_hash + '\n';
  }
  return s;
}

/// Largest K in the grid such that every K' <= K has frequency 1 for this method and kind.
inline std::optional<Index> critical_sparsity(const std::vector<FrequencyRow>& rows, SignalKind kind,
                                              const std::string& method) {
  std::vector<const FrequencyRow*> sel;
  for (const auto& r : rows)
    if (r.kind == kind && r.method == method) sel.push_back(&r);
  std::sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->K < b->K; });
  std::optional<Index> best;
  for (auto* r : sel) {
    if (r->successes != r->trials) break;
    best = r->K;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Noise sweep

struct NoiseRow {
  double snr_db = 0.0;
  std::string method;
  double lambda = 0.0;
  double mean_mse = 0.0;
  double se_mse = 0.0;  // standard error of the mean
  int trials = 0;
};

inline SweepResult<NoiseRow> noise_sweep(const ExperimentConfig& c) {
  require(c.trials >= 1, ErrorKind::Validation, "trials must be at least 1");
  require(!c.snrs_db.empty(), ErrorKind::Validation, "SNR grid is empty");
  require(c.Ks.size() == 1, ErrorKind::Validation, "noise sweep takes exactly one K");
  const Index K = c.Ks.front();
  require(K >= 1 && K <= c.n && c.s <= K, ErrorKind::Validation, "need 1 <= s <= K <= n");
  std::vector<MethodSpec> methods = c.methods;
  if (methods.empty()) methods.push_back({Method::PMOLS});
  bool has_modified = false;
  for (const auto& m : methods) has_modified = has_modified || m.method == Method::ModifiedPMOLS;
  if (!has_modified) {
    require(!c.lambdas.empty(), ErrorKind::Validation, "modified PmOLS needs a lambda grid");
    for (double l : c.lambdas) {
      require(std::isfinite(l) && l >= 0.0, ErrorKind::Validation, "lambda must be nonnegative");
      methods.push_back({Method::ModifiedPMOLS, l});
    }
  }
  SweepResult<NoiseRow> out{config_hash(c, "noise-sweep"), {}, {}};
  const SolverParams params = harness_params(c, K, c.m);
  const std::size_t nm = methods.size();
  for (double snr : c.snrs_db) {
    std::vector<double> errs(static_cast<std::size_t>(c.trials) * nm);
    const std::uint64_t point = static_cast<std::uint64_t>(std::llround(snr * 1000.0));
    parallel_for(static_cast<std::size_t>(c.trials), c.workers, [&](std::size_t t) {
      const std::uint64_t seed = derive_seed(c.seed, "noise", point, t);
      const Matrix psi = gen_gaussian_matrix(c.m, c.n, splitmix64(seed ^ 1));
      const SparseSignal x = gen_sparse_signal(c.n, K, SignalKind::Gaussian, splitmix64(seed ^ 2));
      const Vector y0 = add_noise(psi * x.values, snr, K, c.m, splitmix64(seed ^ 3));
      for (std::size_t j = 0; j < nm; ++j) {
        const std::optional<Vector> est = run_method(methods[j], psi, y0, params);
        const Vector diff = est ? Vector(*est - x.values) : Vector(-x.values);
        errs[t * nm + j] = diff.squaredNorm() / static_cast<double>(c.n);
      }
    });
    for (std::size_t j = 0; j < nm; ++j) {
      double sum = 0.0, sum2 = 0.0;
      for (int t = 0; t < c.trials; ++t) {
        const double e = errs[static_cast<std::size_t>(t) * nm + j];
        sum += e;
        sum2 += e * e;
      }
      const double mean = sum / c.trials;
      const double var = c.trials > 1 ? std::max(0.0, (sum2 - c.trials * mean * mean) / (c.trials - 1)) : 0.0;
      out.rows.push_back({snr, methods[j].name(), methods[j].lambda, mean,
                          std::sqrt(var / c.trials), c.trials});
    }
  }
  return out;
}

inline std::string to_csv(const SweepResult<NoiseRow>& r) {
  std::string s = "snr_db,method,lambda,mean_mse,se_mse,trials,config_hash\n";
  for (const auto& row : r.rows) {
    s += format_double(row.snr_db) + ',' + row.method + ',' + format_double(row.lambda) + ',' +
         format_double(row.mean_mse) + ',' + format_double(row.se_mse) + ',' +
         std::to_string(row.trials) + ',' + r.config_hash + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Imaging

struct ImagingRow {
  std::string object;
  Index m = 0;
  std::string method;
  Psnr psnr;
  Index K = 0;
};

/// Reconstructs an object through lift -> bucket sampling -> method -> min-max rescale.
inline Vector reconstruct_object(const MethodSpec& spec, const LiftedSystem& lifted, const Vector& y0,
                                 Index K, Index s) {
  if (spec.method == Method::GI) return rescale_min_max(gi_correlate(lifted.Psi0, y0));
  const Index k_eff = std::max<Index>(K, 1);
  const Index s_eff = std::min(s, k_eff);
  SolverParams params{k_eff, s_eff, std::nullopt,
                      sample_limited_iteration_cap(k_eff, s_eff, lifted.Psi0.rows())};
  const std::optional<Vector> est = run_method(spec, lifted.Psi0, y0, params);
  if (!est) return Vector::Zero(lifted.Psi0.cols());
  return rescale_min_max(*est);
}

inline SweepResult<ImagingRow> imaging_experiment(const ExperimentConfig& c) {
  require(!c.objects.empty(), ErrorKind::Validation, "no objects supplied");
  require(!c.methods.empty(), ErrorKind::Validation, "method list is empty");
  require(c.m >= 2 && c.s >= 1, ErrorKind::Validation, "need m >= 2 and s >= 1");
  for (const auto& spec : c.methods) {
    require(spec.method == Method::GI || spec.method == Method::MOLS || spec.method == Method::PMOLS,
            ErrorKind::Validation, "imaging supports gi, mols and pmols only");
  }
  SweepResult<ImagingRow> out{config_hash(c, "imaging"), {}, {}};
  const std::size_t count = c.objects.size() * c.methods.size();
  std::vector<ImagingRow> rows(count);
  parallel_for(c.objects.size(), c.workers, [&](std::size_t o) {
    const ObjectImage& truth = c.objects[o];
    const std::string name = o < c.object_names.size() ? c.object_names[o] : "object" + std::to_string(o);
    const Index n = truth.size();
    const Matrix psi = gen_gaussian_matrix(c.m, n, derive_seed(c.seed, "imaging", fnv1a(name), 0));
    const LiftedSystem lifted = lift_nonnegative(psi, c.lift_constant);
    const Vector x = truth.to_vector();
    const Vector y0 = bucket_sample(lifted.Psi0, x);
    const Index K = truth.nonzero_count();
    for (std::size_t j = 0; j < c.methods.size(); ++j) {
      const Vector rec = reconstruct_object(c.methods[j], lifted, y0, K, c.s);
      const ObjectImage image = ObjectImage::from_vector(truth.height(), truth.width(), rec.cwiseMax(0.0));
      rows[o * c.methods.size() + j] = {name, c.m, c.methods[j].name(), psnr(image, truth), K};
    }
  });
  out.rows = std::move(rows);
  return out;
}

inline std::string to_csv(const SweepResult<ImagingRow>& r) {
  std::string s = "object,m,method,psnr_db,config_hash\n";
  for (const auto& row : r.rows) {
    s += row.object + ',' + std::to_string(row.m) + ',' + row.method + ',' +
         (row.psnr.identical() ? std::string("identical") : format_double(*row.psnr.db)) + ',' +
         r.config_hash + '\n';
  }
  return s;
}

}  // namespace pmols
