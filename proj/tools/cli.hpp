#pragma once

#include <ostream>

namespace vadasr::cli {

// Runs one subcommand. Returns the process exit status: 0 ok, 1 usage,
// 2 data, 3 numeric. Diagnostics go to `err` prefixed with "error:".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vadasr::cli
