#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace wgdiff {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

std::string version();

struct RunRequest {
  std::string subcommand;
  std::string config_path;
  std::optional<std::string> out;  ///< overrides the config's output_dir
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
};

const std::vector<std::string>& subcommand_names();

/// Loads the config, runs one experiment and writes manifest.json,
/// summary.json, log.txt and the experiment's CSV/binary artifacts under the
/// output directory. Nothing is written unless the config loads and
/// validates. Errors are reported on `err` and mapped to exit codes:
/// configuration 2, numerical 3, I/O 4.
int run_subcommand(const RunRequest& request, std::ostream& err);

}  // namespace wgdiff
