#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace ripple {

/// UTC instant with one-second resolution.
using Timestamp = std::chrono::sys_seconds;

/// Parses ISO-8601 date-times ("2024-03-01T10:00:00Z", "+02:00" offsets,
/// optional fractional seconds, or a bare date). Throws ParseError.
Timestamp parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp ts);

inline Timestamp from_unix(long long seconds) {
    return Timestamp{std::chrono::seconds{seconds}};
}

}  // namespace ripple
