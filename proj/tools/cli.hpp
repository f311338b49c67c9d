#pragma once

#include <iosfwd>
#include <string>

namespace valgauge::cli {

enum ExitCode : int { ok = 0, internal_error = 1, input_error = 2, backend_error = 3 };

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// SHA-256 of a file as lowercase hex.
std::string sha256_file(const std::string& path);

}  // namespace valgauge::cli
