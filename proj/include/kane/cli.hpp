// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kane::cli {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "KANE_OUTPUT_DIR";

/// Runs one command line (`args[0]` is the program name). Returns the exit
/// code: 0 on success, 1 on a failed command, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kane::cli
