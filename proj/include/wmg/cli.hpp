#pragma once

#include <iosfwd>

namespace wmg {

/// Entry point of the `wmg` executable. Exit codes: 0 success, 1 I/O or
/// data error, 2 usage or configuration error.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace wmg
