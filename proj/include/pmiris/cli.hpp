#pragma once

#include <string>
#include <vector>

namespace pmiris::cli {

/// Exit codes: 0 success, 1 processing failure, 2 usage or configuration error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  ///< args[0] is the program name

}  // namespace pmiris::cli
