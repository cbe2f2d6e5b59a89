#pragma once

#include <iosfwd>

namespace msmo::cli {

// Runs one `msmo` command line. Returns the process exit code: 0 on success,
// 2 on usage errors, 1 on any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msmo::cli
