#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ftg::cli {

// Entry point of the ftg tool; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ftg::cli
