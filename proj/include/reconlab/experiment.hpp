#pragma once

// Deterministic experiment drivers shared by the command-line tool: the
// seed-derivation chains for trials, sweep cells, and spectral probes; a
// bounded worker pool whose output order never depends on scheduling; CSV
// assembly; resumable sweeps; and the built-in self test.

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "reconlab/config.hpp"

namespace reconlab {

inline std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline unsigned resolve_workers(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Calls fn(i) exactly once for each i < count, on up to `workers` threads.
// Callers write into pre-sized slots indexed by i, so the assembled output is
// identical no matter how the work was scheduled. The first exception wins
// and is rethrown after all threads join.
template <class Fn>
inline void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) return;
  if (workers > count) workers = static_cast<unsigned>(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void write_lines(const std::vector<std::string>& lines,
                        const std::string& out_path) {
  if (out_path.empty()) {
    for (const auto& line : lines) std::cout << line << "\n";
    std::cout.flush();
    return;
  }
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
  for (const auto& line : lines) os << line << "\n";
  if (!os) throw std::runtime_error("write failed: " + out_path);
}

// ---------------------------------------------------------------------------
// Attack trials. Seeds chain as master -> trial -> (database, noise):
//   trial_seed = derive_seed(cell_master, trial)
//   database   = Database::random_binary(n, d, derive_seed(trial_seed, 0))
//   noise seed = derive_seed(trial_seed, 1)
// and trial_seed is echoed in the report's seed column.
// ---------------------------------------------------------------------------
inline AttackReport run_attack_trial(const ExperimentConfig& cfg,
                                     std::uint64_t cell_master, int trial) {
  const std::uint64_t trial_seed =
      derive_seed(cell_master, static_cast<std::uint64_t>(trial));
  const auto db =
      Database::random_binary(cfg.n, cfg.d, derive_seed(trial_seed, 0));
  return run_attack(db, cfg.mechanism,
                    cfg.noise_with_seed(derive_seed(trial_seed, 1)),
                    cfg.decoder, trial_seed);
}

inline std::vector<AttackReport> run_attack_trials(const ExperimentConfig& cfg,
                                                   std::uint64_t cell_master,
                                                   unsigned workers) {
  std::vector<AttackReport> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(out.size(), workers, [&](std::size_t t) {
    out[t] = run_attack_trial(cfg, cell_master, static_cast<int>(t));
  });
  return out;
}

// Summary row in the data-row schema: mechanism column holds "summary", the
// seed column holds the trial count, and the hamming_fraction / sigma_min /
// wall_ms columns hold the mean / min / max hamming fraction over the trials.
inline std::string attack_summary_csv_row(
    const ExperimentConfig& cfg, const std::vector<AttackReport>& reports) {
  double sum = 0.0;
  double lo = reports.front().hamming, hi = reports.front().hamming;
  for (const auto& r : reports) {
    sum += r.hamming;
    lo = std::min(lo, r.hamming);
    hi = std::max(hi, r.hamming);
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%d,%d,%.10g,%.10g,%llu,%.10g,%.10g,%.10g",
                cfg.n, cfg.d, cfg.k, cfg.beta, cfg.gamma,
                static_cast<unsigned long long>(reports.size()),
                sum / static_cast<double>(reports.size()), lo, hi);
  return std::string("summary,") + decoder_name(cfg.decoder) + "," + buf;
}

// An attack run is the one-cell sweep: its trials use cell index 0, so a
// single-cell sweep emits these exact rows behind its cell column.
inline std::vector<std::string> attack_output_lines(const ExperimentConfig& cfg,
                                                    unsigned workers) {
  const auto reports =
      run_attack_trials(cfg, derive_seed(cfg.master_seed, 0), workers);
  std::vector<std::string> lines;
  lines.reserve(reports.size() + 3);
  lines.push_back("#schema=1");
  lines.push_back(attack_report_csv_header());
  for (const auto& r : reports)
    lines.push_back(attack_report_csv_row(r, cfg.timing));
  lines.push_back(attack_summary_csv_row(cfg, reports));
  return lines;
}

// ---------------------------------------------------------------------------
// Sweeps. Cell c uses cell_master = derive_seed(master_seed, c.index), then
// the per-trial chain above; every row carries the cell index in a leading
// column. A cell is complete in an existing output file when its block holds
// exactly trials data rows plus its summary row; complete blocks are reused
// verbatim on resume, everything else is recomputed, and the file is always
// rewritten in full cell order (byte-identical to a fresh run).
// ---------------------------------------------------------------------------
inline std::string sweep_csv_header() {
  return "cell," + attack_report_csv_header();
}

inline std::vector<std::vector<std::string>> load_completed_cells(
    const std::string& path, int trials, std::size_t cell_count) {
  std::vector<std::vector<std::string>> blocks(cell_count);
  std::ifstream is(path);
  if (!is) return blocks;  // nothing to resume
  std::string line;
  if (!std::getline(is, line) || line != "#schema=1")
    throw ConfigError(path +
                      ": existing output is not a schema-1 sweep file; "
                      "delete it to start fresh");
  if (!std::getline(is, line) || line != sweep_csv_header())
    throw ConfigError(path +
                      ": existing output has a different header; "
                      "delete it to start fresh");
  std::map<std::size_t, std::vector<std::string>> by_cell;
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) break;  // truncated tail
    std::size_t cell = 0;
    try {
      std::size_t pos = 0;
      cell = std::stoull(line.substr(0, comma), &pos);
      if (pos != comma) break;
    } catch (const std::exception&) {
      break;
    }
    if (cell >= cell_count) continue;  // stale row from a larger grid
    by_cell[cell].push_back(line);
  }
  for (auto& [cell, blk] : by_cell) {
    const std::string summary_prefix = std::to_string(cell) + ",summary,";
    if (blk.size() == static_cast<std::size_t>(trials) + 1 &&
        blk.back().rfind(summary_prefix, 0) == 0)
      blocks[cell] = std::move(blk);
  }
  return blocks;
}

inline std::vector<std::string> sweep_output_lines(
    const SweepConfig& sw, unsigned workers, const std::string& resume_path) {
  const auto cells = sw.cells();
  const int trials = sw.base.trials;
  auto blocks = resume_path.empty()
                    ? std::vector<std::vector<std::string>>(cells.size())
                    : load_completed_cells(resume_path, trials, cells.size());

  std::vector<std::size_t> missing;
  for (std::size_t c = 0; c < cells.size(); ++c)
    if (blocks[c].empty()) missing.push_back(c);

  // One flat work item per (missing cell, trial) pair keeps all workers busy
  // whatever the grid shape.
  const std::size_t total = missing.size() * static_cast<std::size_t>(trials);
  std::vector<AttackReport> results(total);
  parallel_for(total, workers, [&](std::size_t i) {
    const auto& cell = cells[missing[i / trials]];
    const int trial = static_cast<int>(i % trials);
    const ExperimentConfig cfg = sw.cell_config(cell);
    results[i] = run_attack_trial(
        cfg, derive_seed(sw.base.master_seed, cell.index), trial);
  });

  for (std::size_t mi = 0; mi < missing.size(); ++mi) {
    const auto& cell = cells[missing[mi]];
    const ExperimentConfig cfg = sw.cell_config(cell);
    const std::string prefix = std::to_string(cell.index) + ",";
    std::vector<AttackReport> rs(
        results.begin() + static_cast<std::ptrdiff_t>(mi * trials),
        results.begin() + static_cast<std::ptrdiff_t>((mi + 1) * trials));
    auto& blk = blocks[missing[mi]];
    for (const auto& r : rs)
      blk.push_back(prefix + attack_report_csv_row(r, cfg.timing));
    blk.push_back(prefix + attack_summary_csv_row(cfg, rs));
  }

  std::vector<std::string> lines;
  lines.reserve(cells.size() * (static_cast<std::size_t>(trials) + 1) + 2);
  lines.push_back("#schema=1");
  lines.push_back(sweep_csv_header());
  for (const auto& blk : blocks)
    for (const auto& row : blk) lines.push_back(row);
  return lines;
}

// ---------------------------------------------------------------------------
// Spectral probes. For every d in the list and every i < seeds the matrix
// seed is seed_i = derive_seed(master_seed, i) — shared across d values so
// families can be compared at common random numbers — and the probe RNG is
// derive_seed(seed_i, 1). Rows are ordered by (d, i).
// ---------------------------------------------------------------------------
inline std::string spectral_csv_header() {
  return "family,h,d,n,k,seed,sigma_min,op_norm,euclid_ratio,probes";
}

inline Matrix spectral_matrix(const SpectralConfig& cfg, int d,
                              std::uint64_t seed) {
  if (cfg.family == "identity") return Matrix::Identity(cfg.n, cfg.n);
  if (cfg.family == "bernoulli01")
    return gen_matrix(TauRandomSpec::bernoulli01(), d, cfg.n, seed);
  if (cfg.family == "rademacher")
    return gen_matrix(TauRandomSpec::rademacher(), d, cfg.n, seed);
  if (cfg.family == "perturbed")
    return perturbed_matrix(d, cfg.n, cfg.rank1_scale, seed);
  // rowfunc: the k-fold row-function matrix over k copies of one base draw,
  // the same object whose least singular value governs attack accuracy.
  const Matrix T = gen_matrix(cfg.entries, d, cfg.n, seed);
  return row_function_matrix(*cfg.h, std::vector<Matrix>(
                                         static_cast<std::size_t>(cfg.k), T));
}

inline std::vector<std::string> spectral_output_lines(const SpectralConfig& cfg,
                                                      unsigned workers) {
  const std::size_t per_d = static_cast<std::size_t>(cfg.seeds);
  const std::size_t total = cfg.d_values.size() * per_d;
  std::vector<std::string> rows(total);
  parallel_for(total, workers, [&](std::size_t idx) {
    const int d = cfg.d_values[idx / per_d];
    const auto i = static_cast<std::uint64_t>(idx % per_d);
    const std::uint64_t seed_i = derive_seed(cfg.master_seed, i);
    const Matrix M = spectral_matrix(cfg, d, seed_i);
    const auto rep = spectral_report(M, cfg.probes, derive_seed(seed_i, 1));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%llu,%.10g,%.10g,%.10g,%d", d,
                  cfg.n, cfg.k, static_cast<unsigned long long>(seed_i),
                  rep.sigma_min, rep.op_norm, rep.euclid_ratio_min,
                  rep.probes_used);
    rows[idx] = cfg.family + "," + cfg.h_spec + "," + buf;
  });
  std::vector<std::string> lines;
  lines.reserve(total + 2);
  lines.push_back("#schema=1");
  lines.push_back(spectral_csv_header());
  for (auto& r : rows) lines.push_back(std::move(r));
  return lines;
}

// ---------------------------------------------------------------------------
// Self test: fast exact-oracle checks of the pipeline's invariants, printing
// one line per check. Returns the number of failures.
// ---------------------------------------------------------------------------
inline int run_selftest(std::ostream& os) {
  int failures = 0;
  auto check = [&](const char* name, bool ok, const std::string& detail = "") {
    if (ok) {
      os << "[ok] " << name << "\n";
    } else {
      ++failures;
      os << "[fail] " << name << (detail.empty() ? "" : ": " + detail) << "\n";
    }
  };

  {
    Xoshiro256ss g(42);
    const bool stream_ok = g.next() == 1546998764402558742ull &&
                           g.next() == 6990951692964543102ull;
    check("rng reference stream", stream_ok);
    check("seed derivation", derive_seed(42, 0) == 13679457532755275413ull &&
                                 derive_seed(42, 1) == 2949826092126892291ull);
  }

  {
    bool ok = true;
    for (const char* name : {"and3", "or3", "xor3", "maj3"}) {
      const auto f = BooleanFunction::from_name_or_literal(name);
      const auto f2 = decompose_last_variable(f).f2;
      if (to_multilinear(f2).full_numerator() != 0)
        ok = ok && check_derivative_identity(f2, 64, 7);
      const auto g2 = decompose_pm(to_pm_function(f)).g2;
      if (to_multilinear(g2).full_numerator() != 0)
        ok = ok && check_pm_identity(g2, 64, 7);
    }
    check("row-function identities", ok);
  }

  {
    // The two boolean linearizations must agree entry for entry and solve
    // exactly on clean counts.
    bool equal = true, exact = true;
    for (const char* lit : {"and2", "xor2", "maj3", "p=3;table=01101001"}) {
      const auto f = BooleanFunction::from_name_or_literal(lit);
      const auto db = Database::random_binary(9, 4, 1000 + f.arity());
      const auto y = release_boolean_counts(db, f, NoiseSpec::none()).y;
      const auto a = build_boolean_system(db.U, f, y);
      const auto b = build_pm_boolean_system(db.U, f, y);
      equal = equal && (a.A - b.A).cwiseAbs().maxCoeff() == 0.0 &&
              (a.b - b.b).cwiseAbs().maxCoeff() == 0.0;
      const Vector s = db.secret_vector();
      exact = exact && (a.A * s - (a.y - a.b)).cwiseAbs().maxCoeff() == 0.0;
    }
    check("boolean linearizations agree", equal);
    check("clean counts solve exactly", exact);
  }

  {
    const auto db = Database::random_binary(10, 8, 5);
    const auto mech =
        MechanismSpec::boolean_count(BooleanFunction::from_name_or_literal("maj3"));
    const auto ls = run_attack(db, mech, NoiseSpec::none(), DecoderKind::LeastSquares);
    const auto lp = run_attack(db, mech, NoiseSpec::none(), DecoderKind::L1);
    check("noiseless decoding", ls.hamming == 0.0 && lp.hamming == 0.0);
  }

  {
    const auto db = Database::random_binary(12, 40, 6);
    const auto lin =
        run_attack(db, MechanismSpec::linreg(), NoiseSpec::none(),
                   DecoderKind::LeastSquares);
    const auto mest =
        run_attack(db, MechanismSpec::mest("squared"), NoiseSpec::none(),
                   DecoderKind::LeastSquares);
    check("regression attacks",
          lin.hamming == 0.0 && mest.s_hat == lin.s_hat);
  }

  return failures;
}

}  // namespace reconlab
