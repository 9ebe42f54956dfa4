#pragma once

#include <iosfwd>

namespace phpq::cli {

/// Entry point of the `phpq` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phpq::cli
