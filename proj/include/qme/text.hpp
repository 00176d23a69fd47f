// text.hpp — Locale-independent numeric formatting for CSV/JSON output.

#pragma once

#include <charconv>
#include <string>

namespace qme::text {

// 17 significant digits, '.' decimal separator regardless of locale; doubles
// round-trip exactly.
inline std::string fmt17(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

}  // namespace qme::text
