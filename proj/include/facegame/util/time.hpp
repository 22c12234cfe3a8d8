#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>

namespace facegame {

/// ISO-8601 UTC with millisecond precision, e.g. 2024-03-01T12:00:05.250Z.
inline std::string format_utc(std::chrono::system_clock::time_point tp)
{
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
    return buf;
}

inline std::string utc_now() { return format_utc(std::chrono::system_clock::now()); }

} // namespace facegame
