#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cstc {

/// Command-line entry point. Returns 0 on success, 2 for usage errors and 1
/// for runtime failures; errors are reported as one JSON object on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cstc
