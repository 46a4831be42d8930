#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fosr/io.hpp"

namespace fosr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

/// A file produced by a command, written only after every step succeeded.
struct OutputFile {
  std::string name;
  std::string content;
};

/// Runs one subcommand on a parsed config. Throws on failure.
std::vector<OutputFile> run_command(const std::string& command, const Config& config, std::ostream& log);

/// Full entry point: `fosr <command> --config PATH [--seed N] [--out DIR] [--override k=v]...`.
/// Returns the process exit code; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& err);

}  // namespace fosr
