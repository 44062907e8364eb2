#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nesskit::cli {

enum ExitCode { ok = 0, failure = 1, config_error = 2, numerical_error = 3, window_truncated = 4 };

// Runs one subcommand. Results go to --out; short summaries to `out`, errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace nesskit::cli
