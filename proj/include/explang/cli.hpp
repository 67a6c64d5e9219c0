#pragma once

#include <filesystem>
#include <iosfwd>

namespace explang {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Entry point of the `explang` tool. Exit codes: 0 success, 1 usage,
/// validation or configuration failure, 2 file system failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Bundled language profiles: $EXPLANG_PROFILES when set, otherwise the
/// profiles shipped in the data directory.
std::filesystem::path default_profiles_path();

}  // namespace explang
