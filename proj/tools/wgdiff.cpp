#include <iostream>

#include "CLI11.hpp"
#include "wgdiff/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weighted-metric graph energies, metric recovery and heterogeneous diffusion"};
  app.set_version_flag("--version", wgdiff::version());
  app.require_subcommand(1);
  app.fallthrough();

  wgdiff::RunRequest request;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", request.config_path, "Experiment config (JSON)")->required();
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides output_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides seed)");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (overrides threads)")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", request.quiet, "Do not echo the log to stderr");
  for (const auto& name : wgdiff::subcommand_names()) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wgdiff::kExitConfig;
  }
  request.subcommand = app.get_subcommands().front()->get_name();
  if (*out_opt) request.out = out;
  if (*seed_opt) request.seed = seed;
  if (*threads_opt) request.threads = threads;
  return wgdiff::run_subcommand(request, std::cerr);
}
