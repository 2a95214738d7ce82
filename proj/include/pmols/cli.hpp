#pragma once

// Command-line front end. run() never throws: every failure becomes one
// stderr line "error:<kind>:<message>" and an exit code
//   0 success, 1 bad arguments or input, 2 numerical/runtime failure, 3 check violation.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmols/csv_io.hpp"
#include "pmols/errors.hpp"
#include "pmols/experiments.hpp"
#include "pmols/imaging.hpp"
#include "pmols/matrix_core.hpp"
#include "pmols/precondition.hpp"
#include "pmols/recovery.hpp"
#include "pmols/theory_checks.hpp"

namespace pmols::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitViolation = 3;

/// "start:stop:step" (stop excluded), a comma list, or a single value.
inline std::vector<double> parse_real_range(const std::string& text) {
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::Validation, "bad number '" + s + "' in range '" + text + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    require(parts.size() == 3, ErrorKind::Validation, "range '" + text + "' must be start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    require(step > 0.0, ErrorKind::Validation, "range step must be positive");
    require(start < stop, ErrorKind::Validation, "range '" + text + "' is empty");
    for (long long i = 0;; ++i) {
      // Round away accumulated binary noise so 0.05:1:0.05 yields 0.15, not 0.15000000000000002.
      const double v = std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12;
      if (v >= stop - 1e-9 * step) break;
      out.push_back(v);
    }
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  require(!out.empty(), ErrorKind::Validation, "empty list '" + text + "'");
  return out;
}

inline std::vector<Index> parse_index_range(const std::string& text) {
  std::vector<Index> out;
  for (double v : parse_real_range(text)) {
    require(v == std::floor(v), ErrorKind::Validation, "'" + text + "' must contain integers only");
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');)
    if (!p.empty()) out.push_back(p);
  return out;
}

/// PMOLS_WORKERS overrides the hardware default; --workers overrides both.
inline unsigned env_default_workers() {
  if (const char* env = std::getenv("PMOLS_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
  }
  return default_workers();
}

namespace detail {

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

inline void report_skips(const std::vector<std::string>& skipped, std::ostream& err) {
  for (const auto& s : skipped) err << "skip: " << s << '\n';
}

inline ObjectImage builtin_object(const std::string& name) {
  if (name == "digit3") return synthetic_digit_three();
  if (name == "digit7") return synthetic_digit_seven();
  if (name == "taichi") return synthetic_tai_chi();
  fail(ErrorKind::Validation, "unknown builtin object '" + name + "' (digit3, digit7, taichi)");
}

inline PreconditionMode parse_mode(const std::string& mode, double lambda) {
  if (mode == "none") return PreconditionMode::none();
  if (mode == "pip") return PreconditionMode::pip();
  if (mode == "modified") return PreconditionMode::modified(lambda);
  fail(ErrorKind::Validation, "unknown mode '" + mode + "' (none, pip, modified)");
}

inline std::string join(const IndexSet& s) {
  std::string out;
  for (Index i : s) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i);
  }
  return out;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Pseudo-inverse preconditioning and multiple orthogonal least squares toolkit"};
  app.require_subcommand(1);
  unsigned workers = env_default_workers();
  app.add_option("--workers", workers,
                 "Worker threads for experiments (default: PMOLS_WORKERS or available cores)")
      ->check(CLI::PositiveNumber);

  // coherence
  std::string matrix_path, samples_path, out_path, mode = "pip";
  double rank_tol = kDefaultRankTol;
  auto* coh = app.add_subcommand("coherence", "Mutual coherence of a CSV matrix before and after PIP");
  coh->add_option("--matrix", matrix_path, "Matrix CSV (rows per line, no header)")->required();
  coh->add_option("--rank-tol", rank_tol, "Relative singular-value cutoff for the numerical rank")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  // precondition
  std::string p_out, phi_out;
  double lambda = 0.0;
  auto* pre = app.add_subcommand("precondition", "Compute P for a CSV matrix and report P*Psi statistics");
  pre->add_option("--matrix", matrix_path, "Matrix CSV")->required();
  pre->add_option("--mode", mode, "pip or modified")->capture_default_str();
  pre->add_option("--lambda", lambda, "Ridge parameter for --mode modified")->capture_default_str();
  pre->add_option("--rank-tol", rank_tol, "Relative singular-value cutoff")->capture_default_str();
  pre->add_option("--out", p_out, "Write P as CSV");
  pre->add_option("--phi-out", phi_out, "Write P*Psi as CSV");

  // recover
  Index K = 0, s = 1;
  std::optional<double> tol;
  std::optional<Index> max_iters;
  std::string algorithm = "mols";
  auto* rec = app.add_subcommand("recover", "Recover a sparse vector from CSV matrix and samples");
  rec->add_option("--matrix", matrix_path, "Sensing matrix Psi (CSV)")->required();
  rec->add_option("--samples", samples_path, "Samples y0 (CSV row or column)")->required();
  rec->add_option("--K", K, "Target sparsity")->required()->check(CLI::PositiveNumber);
  rec->add_option("--s", s, "Indices selected per iteration")->capture_default_str()->check(CLI::PositiveNumber);
  rec->add_option("--mode", mode, "Preconditioning: none, pip or modified")->capture_default_str();
  rec->add_option("--lambda", lambda, "Ridge parameter for --mode modified")->capture_default_str();
  rec->add_option("--algorithm", algorithm, "mols or omp")->capture_default_str();
  rec->add_option("--tol", tol, "Absolute residual tolerance (default 1e-6 * |y|, i.e. relative)");
  rec->add_option("--max-iters", max_iters, "Iteration cap (default floor(min(K, m/K)))");
  rec->add_option("--out", out_path, "Write x_hat as CSV instead of printing it");

  // exp
  auto* exp = app.add_subcommand("exp", "Seeded Monte Carlo experiments (CSV output)");
  exp->require_subcommand(1);
  ExperimentConfig cfg;
  std::string rates = "0.1:1:0.1", ks = "5:65:5", kinds = "gaussian", methods, snrs = "10:50:10",
              lambdas = "0.001,0.01,0.1,1", objects = "builtin:digit3,builtin:digit7,builtin:taichi",
              recon_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--trials", cfg.trials, "Trials per grid point")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    sub->add_option("--out", out_path, "Write CSV here instead of stdout");
  };
  auto* e_coh = exp->add_subcommand("coherence-sweep", "Mean mu(Psi) and mu(P*Psi) against sampling rate");
  e_coh->add_option("--n", cfg.n, "Signal length")->capture_default_str();
  e_coh->add_option("--rates", rates, "Sampling rates m/n, start:stop:step (stop excluded) or a,b,c")
      ->capture_default_str();
  add_common(e_coh);

  auto* e_freq = exp->add_subcommand("recovery-freq", "Exact-recovery frequency against sparsity K");
  e_freq->add_option("--m", cfg.m, "Samples")->capture_default_str();
  e_freq->add_option("--n", cfg.n, "Signal length")->capture_default_str();
  e_freq->add_option("--K", ks, "Sparsity grid, start:stop:step (stop excluded) or a,b,c")->capture_default_str();
  e_freq->add_option("--kinds", kinds, "Signal kinds: gaussian, pam2, two-valued")->capture_default_str();
  e_freq->add_option("--s", cfg.s, "Indices per iteration")->capture_default_str();
  e_freq->add_option("--methods", methods, "mols, pmols, omp, gi (default mols,pmols)");
  e_freq->add_option("--lambdas", lambdas, "Also run modified PmOLS at these lambdas when --modified is set")
      ->capture_default_str();
  bool with_modified = false;
  e_freq->add_flag("--modified", with_modified, "Add modified PmOLS at each --lambdas value");
  e_freq->add_flag("--literal-cap", cfg.literal_iteration_cap,
                   "Use floor(min(K, m/K)) iterations instead of min(K, floor(m/s))");
  add_common(e_freq);

  Index noise_k = 50;
  auto* e_noise = exp->add_subcommand("noise-sweep", "Mean MSE of PmOLS and modified PmOLS against SNR");
  e_noise->add_option("--m", cfg.m, "Samples")->capture_default_str();
  e_noise->add_option("--n", cfg.n, "Signal length")->capture_default_str();
  e_noise->add_option("--K", noise_k, "Sparsity")->capture_default_str();
  e_noise->add_option("--s", cfg.s, "Indices per iteration")->capture_default_str();
  e_noise->add_option("--snr", snrs, "SNR grid in dB, start:stop:step (stop excluded) or a,b,c")->capture_default_str();
  e_noise->add_option("--lambdas", lambdas, "Ridge parameters for modified PmOLS")->capture_default_str();
  add_common(e_noise);

  auto* e_img = exp->add_subcommand("imaging", "Synthetic ghost-imaging reconstruction and PSNR");
  e_img->add_option("--objects", objects,
                    "Comma list of PGM paths or builtin:digit3|digit7|taichi")->capture_default_str();
  e_img->add_option("--m", cfg.m, "Bucket samples")->capture_default_str();
  e_img->add_option("--s", cfg.s, "Indices per iteration")->capture_default_str();
  e_img->add_option("--methods", methods, "gi, mols, pmols (default gi,mols,pmols)");
  e_img->add_option("--c0", cfg.lift_constant, "Lift constant (default max(0, -min Psi))");
  e_img->add_option("--recon-dir", recon_dir, "Also write reconstructions as PGM files here");
  e_img->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  e_img->add_option("--out", out_path, "Write CSV here instead of stdout");

  // check
  std::string check_name;
  auto* chk = app.add_subcommand("check", "Run inequality checks; exit 3 on any violation");
  chk->add_option("name", check_name, "Check family name or 'all'")->required();
  chk->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  chk->add_option("--out", out_path, "Write CSV here instead of stdout");

  // gen
  auto* gen = app.add_subcommand("gen", "Write test inputs");
  gen->require_subcommand(1);
  std::string kind_name = "gaussian", signal_out, dir = ".";
  auto* g_inst = gen->add_subcommand("instance", "Gaussian Psi, a K-sparse x and y0 = Psi x as CSV files");
  g_inst->add_option("--m", cfg.m, "Samples")->capture_default_str();
  g_inst->add_option("--n", cfg.n, "Signal length")->capture_default_str();
  g_inst->add_option("--K", K, "Sparsity")->required();
  g_inst->add_option("--kind", kind_name, "gaussian, pam2 or two-valued")->capture_default_str();
  g_inst->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
  g_inst->add_option("--matrix", matrix_path, "Output path for Psi")->required();
  g_inst->add_option("--samples", samples_path, "Output path for y0")->required();
  g_inst->add_option("--signal", signal_out, "Output path for x");
  auto* g_obj = gen->add_subcommand("objects", "Write the builtin 28x28 test objects as PGM");
  g_obj->add_option("--dir", dir, "Output directory")->capture_default_str();

  // Defaults documented in every help page.
  const std::string footer =
      "Defaults: residual tol 1e-6 relative to |y|, trials " + std::to_string(kDefaultTrials) +
      ", rank_tol 1e-12 relative to sigma_1. Ranges: start:stop:step includes start, excludes stop.";
  app.footer(footer);
  for (CLI::App* sub : {coh, pre, rec, exp, e_coh, e_freq, e_noise, e_img, chk, gen, g_inst, g_obj})
    sub->footer(footer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    err << "error:usage:" << msg << '\n';
    return kExitValidation;
  }
  cfg.workers = workers;

  try {
    if (*coh) {
      const Matrix psi = load_matrix_csv(matrix_path);
      out << "shape: " << shape_string(psi) << '\n';
      out << "mu_psi: " << format_double(mutual_coherence(psi)) << '\n';
      const Preconditioner p = pip_preconditioner(psi, rank_tol);
      out << "rank: " << p.source_rank << '\n';
      out << "mu_ppsi: " << format_double(mutual_coherence_ignoring_null_columns(p.P * psi)) << '\n';
      if (p.nu_m) out << "nu_m: " << format_double(*p.nu_m) << '\n';
      return kExitOk;
    }
    if (*pre) {
      const Matrix psi = load_matrix_csv(matrix_path);
      Preconditioner p;
      if (mode == "pip") {
        p = pip_preconditioner(psi, rank_tol);
      } else if (mode == "modified") {
        p = modified_pip(psi, lambda, rank_tol);
      } else {
        fail(ErrorKind::Validation, "unknown mode '" + mode + "' (pip, modified)");
      }
      const Matrix phi = p.P * psi;
      static constexpr const char* kCases[] = {"full-row-rank", "full-column-rank", "rank-deficient"};
      out << "shape: " << shape_string(psi) << '\n';
      out << "rank: " << p.source_rank << '\n';
      out << "case: " << kCases[static_cast<int>(p.rank_case)] << '\n';
      if (p.nu_m) out << "nu_m: " << format_double(*p.nu_m) << '\n';
      out << "frobenius_distance_to_identity: " << format_double(frobenius_distance_to_identity(phi)) << '\n';
      out << "projector_deviation: " << format_double(parseval_check(phi, 1e-8).max_deviation) << '\n';
      out << "mu_phi: " << format_double(mutual_coherence_ignoring_null_columns(phi)) << '\n';
      if (!p_out.empty()) write_text_file(p_out, matrix_to_csv(p.P));
      if (!phi_out.empty()) write_text_file(phi_out, matrix_to_csv(phi));
      return kExitOk;
    }
    if (*rec) {
      const Matrix psi = load_matrix_csv(matrix_path);
      const Vector y0 = load_vector_csv(samples_path);
      const SensingSystem sys = build_system(psi, y0, detail::parse_mode(mode, lambda));
      RecoveryResult r;
      if (algorithm == "mols") {
        r = pmols::detail::greedy_solve(sys.Phi, sys.y, SolverParams{K, s, tol, max_iters}, psi.rows(),
                                 pmols::detail::Rule::ProjectedCorrelation);
      } else if (algorithm == "omp") {
        r = omp(sys.Phi, sys.y, K, tol, max_iters);
      } else {
        fail(ErrorKind::Validation, "unknown algorithm '" + algorithm + "' (mols, omp)");
      }
      out << "support: " << detail::join(r.T_hat) << '\n';
      out << "iterations: " << r.iterations << '\n';
      out << "termination: " << to_string(r.termination) << '\n';
      out << "residual_norm: " << format_double(r.residual_norms.back()) << '\n';
      if (out_path.empty()) {
        out << "x_hat:\n" << vector_to_csv(r.x_hat);
      } else {
        write_text_file(out_path, vector_to_csv(r.x_hat));
      }
      return kExitOk;
    }
    if (*e_coh) {
      cfg.rates = parse_real_range(rates);
      const auto res = coherence_sweep(cfg);
      detail::report_skips(res.skipped, err);
      detail::emit(to_csv(res), out_path, out);
      return kExitOk;
    }
    if (*e_freq) {
      cfg.Ks = parse_index_range(ks);
      cfg.kinds.clear();
      for (const auto& k : split_list(kinds)) cfg.kinds.push_back(parse_signal_kind(k));
      for (const auto& mth : split_list(methods.empty() ? "mols,pmols" : methods))
        cfg.methods.push_back(parse_method(mth));
      if (with_modified)
        for (double l : parse_real_range(lambdas)) cfg.methods.push_back({Method::ModifiedPMOLS, l});
      const auto res = recovery_frequency(cfg);
      detail::report_skips(res.skipped, err);
      detail::emit(to_csv(res), out_path, out);
      return kExitOk;
    }
    if (*e_noise) {
      cfg.Ks = {noise_k};
      cfg.snrs_db = parse_real_range(snrs);
      cfg.lambdas = parse_real_range(lambdas);
      const auto res = noise_sweep(cfg);
      detail::emit(to_csv(res), out_path, out);
      return kExitOk;
    }
    if (*e_img) {
      for (const auto& o : split_list(objects)) {
        if (o.rfind("builtin:", 0) == 0) {
          cfg.object_names.push_back(o.substr(8));
          cfg.objects.push_back(detail::builtin_object(o.substr(8)));
        } else {
          cfg.object_names.push_back(std::filesystem::path(o).stem().string());
          cfg.objects.push_back(load_pgm(o));
        }
      }
      for (const auto& mth : split_list(methods.empty() ? "gi,mols,pmols" : methods))
        cfg.methods.push_back(parse_method(mth));
      const auto res = imaging_experiment(cfg);
      if (!recon_dir.empty()) {
        // Rerun the reconstructions for the images; the CSV stays the primary output.
        std::filesystem::create_directories(recon_dir);
        for (std::size_t o = 0; o < cfg.objects.size(); ++o) {
          const ObjectImage& truth = cfg.objects[o];
          const Matrix psi = gen_gaussian_matrix(cfg.m, truth.size(),
                                                 derive_seed(cfg.seed, "imaging", fnv1a(cfg.object_names[o]), 0));
          const LiftedSystem lifted = lift_nonnegative(psi, cfg.lift_constant);
          const Vector y0 = bucket_sample(lifted.Psi0, truth.to_vector());
          for (const auto& mth : cfg.methods) {
            const Vector v = reconstruct_object(mth, lifted, y0, truth.nonzero_count(), cfg.s);
            const ObjectImage img = ObjectImage::from_vector(truth.height(), truth.width(),
                                                             v.cwiseMax(0.0).cwiseMin(255.0));
            save_pgm(img, std::filesystem::path(recon_dir) / (cfg.object_names[o] + "_" + mth.name() + ".pgm"));
          }
        }
      }
      detail::emit(to_csv(res), out_path, out);
      return kExitOk;
    }
    if (*chk) {
      std::vector<std::string> names;
      if (check_name == "all") {
        names = check_names();
      } else {
        names.push_back(check_name);
      }
      std::vector<CheckReport> reports;
      for (const auto& name : names) reports.push_back(run_check_family(name, cfg.seed, cfg.workers));
      detail::emit(to_csv(reports), out_path, out);
      for (const auto& r : reports) {
        if (!r.passed()) {
          err << "error:violation:" << r.name << " reported " << r.violations << " violations\n";
          return kExitViolation;
        }
      }
      return kExitOk;
    }
    if (*g_inst) {
      const SparseSignal x = gen_sparse_signal(cfg.n, K, parse_signal_kind(kind_name),
                                               derive_seed(cfg.seed, "instance-signal", 0, 0));
      const Matrix psi = gen_gaussian_matrix(cfg.m, cfg.n, derive_seed(cfg.seed, "instance-matrix", 0, 0));
      write_text_file(matrix_path, matrix_to_csv(psi));
      write_text_file(samples_path, vector_to_csv(psi * x.values));
      if (!signal_out.empty()) write_text_file(signal_out, vector_to_csv(x.values));
      out << "support: " << detail::join(x.support) << '\n';
      return kExitOk;
    }
    if (*g_obj) {
      std::filesystem::create_directories(dir);
      save_pgm(synthetic_digit_three(), std::filesystem::path(dir) / "digit3.pgm");
      save_pgm(synthetic_digit_seven(), std::filesystem::path(dir) / "digit7.pgm");
      save_pgm(synthetic_tai_chi(), std::filesystem::path(dir) / "taichi.pgm");
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error:" << to_string(e.kind()) << ':' << e.what() << '\n';
    return is_validation_kind(e.kind()) ? kExitValidation : kExitRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error:io:" << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error:runtime:" << e.what() << '\n';
    return kExitRuntime;
  }
  err << "error:usage:no subcommand given\n";
  return kExitValidation;
}

}  // namespace pmols::cli
