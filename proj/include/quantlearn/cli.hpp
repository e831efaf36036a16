#pragma once

#include <iosfwd>

namespace quantlearn {

/// Entry point of the quantlearn tool. Returns 0 on success, 1 on a usage
/// error and 2 on a data or configuration error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace quantlearn
