#pragma once

#include <iosfwd>

namespace qsr {

//! Entry point of the `qsr` command-line tool. Returns the process exit
//! status: 0 on success, 1 on a runtime error, 2 on a usage error. Errors are
//! written to `err` as a single line "error[<kind>]: <message>".
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qsr
