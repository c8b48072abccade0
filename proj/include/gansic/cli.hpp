#pragma once

#include <iosfwd>

namespace gansic {

// Parses argv, validates configuration, runs the named workflow, and writes
// its artifacts into the output directory. Returns the process exit code:
// 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gansic
