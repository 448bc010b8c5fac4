#pragma once

// Entry point of the owl3d command line, callable in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace owl3d::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

/// `args` excludes the program name. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace owl3d::cli
