#pragma once

#include <iosfwd>

namespace droneview {

/// Entry point of the `droneview` command line; returns the process exit code.
/// Subcommands: run, costmap, characterize, serve.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace droneview
