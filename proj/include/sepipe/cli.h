// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sepipe {

/// Entry point for the `sepipe` tool. `args` excludes the program name.
/// Returns the process exit status: 0 when every requested item succeeded,
/// 1 when some item or the command failed, 2 for usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace sepipe
