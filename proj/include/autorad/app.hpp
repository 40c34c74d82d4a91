#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace autorad {

/// Command-line entry point. Exit codes: 0 success, 1 invalid input
/// (ValidationError or bad arguments), 2 any other failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with arguments after the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick oracle and invariant checks over the library; each check catches its
/// own exceptions.
std::vector<SelftestCheck> run_selftest_checks();

}  // namespace autorad
