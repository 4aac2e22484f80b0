#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace recipeforge::cli {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);
int run(int argc, const char* const* argv);

}  // namespace recipeforge::cli
