#pragma once

#include <string>
#include <vector>

namespace liftnet::cli {

// Entry point for the liftnet tool; args excludes the program name.
// Subcommands: train, eval, compare. Returns the process exit code:
// 0 success, 1 runtime failure (training abort, bad artifacts),
// 2 malformed flags.
int run(const std::vector<std::string>& args);

}  // namespace liftnet::cli
