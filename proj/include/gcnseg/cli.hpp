#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gcnseg {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Runs the `gcnseg` command line. args[0] is the program name. Subcommands:
// slice, train, eval, predict, verify, synth.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gcnseg
