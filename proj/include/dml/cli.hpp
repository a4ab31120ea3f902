#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dml {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 invalid input or flags, 3 identification or
// learner failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dml
