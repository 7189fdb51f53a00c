#pragma once

namespace fedsim {

// Command-line entry point: run, replicate and cost subcommands. Returns the
// process exit status: 0 success, 1 runtime failure, 2 usage/config error.
int run_cli(int argc, const char* const* argv);

}  // namespace fedsim
