#pragma once

#include <iosfwd>

namespace sideband::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

/// Entry point of the `sideband` tool. JSON results go to `out`, logs and
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sideband::cli
