// reconlab command-line harness.
//
// Subcommands:
//   attack    repeated attack trials from a config file, CSV out
//   sweep     a grid of attack cells, resumable by cell index
//   spectral  least-singular-value / section-ratio probes of matrix families
//   selftest  built-in exact-oracle checks, no config needed
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reconlab/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int workers = 0;  // 0 = available parallelism
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& fl) {
  cmd->add_option("--config", fl.config_path, "key=value config file")
      ->required();
  fl.seed_opt =
      cmd->add_option("--seed", fl.seed_override, "override the config's seed");
  fl.out_opt = cmd->add_option("--out", fl.out_override,
                               "override the config's output path");
  cmd->add_option("--workers", fl.workers,
                  "worker threads (default: available parallelism)");
}

reconlab::ConfigMap load_with_overrides(const CommonFlags& fl) {
  auto m = reconlab::ConfigMap::parse_file(fl.config_path);
  if (fl.seed_opt->count()) m.set("seed", std::to_string(fl.seed_override));
  if (fl.out_opt->count()) m.set("out", fl.out_override);
  return m;
}

int run_attack_cmd(const CommonFlags& fl) {
  auto m = load_with_overrides(fl);
  const auto cfg = reconlab::ExperimentConfig::from_map(m);
  m.reject_unknown();
  reconlab::write_lines(
      reconlab::attack_output_lines(cfg, reconlab::resolve_workers(fl.workers)),
      cfg.out);
  return 0;
}

int run_sweep_cmd(const CommonFlags& fl) {
  auto m = load_with_overrides(fl);
  const auto sw = reconlab::SweepConfig::from_map(m);
  m.reject_unknown();
  // Writing to a path makes the sweep resumable: completed cells found there
  // are reused verbatim, and the file is rewritten in full.
  reconlab::write_lines(
      reconlab::sweep_output_lines(sw, reconlab::resolve_workers(fl.workers),
                                   sw.base.out),
      sw.base.out);
  return 0;
}

int run_spectral_cmd(const CommonFlags& fl) {
  auto m = load_with_overrides(fl);
  const auto cfg = reconlab::SpectralConfig::from_map(m);
  m.reject_unknown();
  reconlab::write_lines(
      reconlab::spectral_output_lines(cfg, reconlab::resolve_workers(fl.workers)),
      cfg.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reconstruction-attack laboratory"};
  app.require_subcommand(1);

  CommonFlags attack_fl, sweep_fl, spectral_fl;
  auto* attack =
      app.add_subcommand("attack", "run repeated attack trials from a config");
  add_common(attack, attack_fl);
  auto* sweep =
      app.add_subcommand("sweep", "run a grid of attack cells (resumable)");
  add_common(sweep, sweep_fl);
  auto* spectral =
      app.add_subcommand("spectral", "probe spectra of release matrix families");
  add_common(spectral, spectral_fl);
  auto* selftest =
      app.add_subcommand("selftest", "run built-in exact-oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (attack->parsed()) return run_attack_cmd(attack_fl);
    if (sweep->parsed()) return run_sweep_cmd(sweep_fl);
    if (spectral->parsed()) return run_spectral_cmd(spectral_fl);
    if (selftest->parsed())
      return reconlab::run_selftest(std::cout) == 0 ? 0 : 3;
  } catch (const reconlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
