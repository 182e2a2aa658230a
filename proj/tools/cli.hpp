#pragma once

#include <iosfwd>

namespace i2drnn {

/// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace i2drnn
