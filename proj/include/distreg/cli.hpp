#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace distreg {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Entry point of the `distreg` tool; args excludes the program name.
// Errors are reported as one JSON object on err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, printed as 16 hex digits by the CLI.
unsigned long long fnv1a64(const std::string& bytes);

}  // namespace distreg
