#pragma once

#include <string_view>

namespace qperc {

inline constexpr std::string_view kVersion = "1.0.0";

// Bumped whenever a CSV schema changes; embedded in every output header line.
inline constexpr std::string_view kSchemaVersion = "v1";

}  // namespace qperc
