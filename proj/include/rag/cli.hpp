#pragma once

#include <iosfwd>

namespace rag {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 partial
/// failure (some dataset runs or judge calls failed).
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPartial = 3;

/// Entry point of `ragctl`. Streams are injected for tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace rag
