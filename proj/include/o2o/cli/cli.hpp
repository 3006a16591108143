#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace o2o::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
/// Bad flags, bad configuration or unreadable inputs.
inline constexpr int kExitConfig = 2;
/// Training or a numeric check produced a non-finite or out-of-tolerance value.
inline constexpr int kExitNumeric = 3;

/// Entry point of the o2olab tool. Output directories are written atomically
/// and carry a manifest.json with the config snapshot, seeds and FNV-1a hashes
/// of every artifact.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace o2o::cli
