#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace satdepth::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args[0] is the program name). Errors are reported
/// on `err` as `error: kind=<kind> message="<text>"`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Called by serve-annotate once the port is bound, with a function that
/// stops the server. Lets tests and embedders drive the blocking command.
using ServeReadyHook = std::function<void(int port, std::function<void()> stop)>;
void set_serve_ready_hook(ServeReadyHook hook);

}  // namespace satdepth::cli
