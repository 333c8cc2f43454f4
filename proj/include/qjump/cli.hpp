#pragma once

#include <string>
#include <vector>

namespace qjump::cli {

/// Entry point behind the qjump binary; returns the process exit code.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace qjump::cli
