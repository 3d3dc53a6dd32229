#pragma once

#include "ionent/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ionent {

// A file the run wants to write. Runs collect every output first and write
// only after the experiment has succeeded.
struct OutputFile {
  std::string path;
  std::string contents;
};

struct RunOutcome {
  std::vector<OutputFile> files;
  std::string summary;
};

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

/// Executes the configured experiment. Throws ConfigError for a missing
/// seed, other exceptions for experiment failures.
RunOutcome run_experiment(const RunConfig& cfg);

/// Four reference histograms plus a calibration report.
RunOutcome emit_reference_bundle(const RunConfig& cfg);

/// Full command line (without the program name). Writes outputs, prints the
/// summary to `out` and diagnostics to `err`; returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ionent
