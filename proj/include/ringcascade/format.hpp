#pragma once

#include <fmt/format.h>

#include <string>
#include <string_view>

namespace ringcascade {

inline constexpr std::string_view kCsvHeader = "# ringcascade-csv v1";

/// Fixed 17-significant-digit rendering used in every CSV and JSON output.
inline std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace ringcascade
