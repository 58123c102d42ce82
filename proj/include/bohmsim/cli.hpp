#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace bohmsim::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int { Ok = 0, ConfigFailure = 2, NumericFailure = 3, IoFailure = 4 };

/// Reading or writing a run artifact failed.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Runs the tool with `args` (args[0] is the program name). Progress goes to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Version string written into manifests.
std::string version();

} // namespace bohmsim::cli
