#pragma once

namespace reid {

// Entry point for the `reid` binary. Exit codes: 0 success, 2 config error,
// 3 I/O error, 4 numeric or verification failure.
int run_cli(int argc, char** argv);

}  // namespace reid
