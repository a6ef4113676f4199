#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sleepassoc {

// All instants are UTC epoch seconds; a named local offset (minutes) travels
// alongside. Night logic runs entirely in local time: sleep is a local-clock
// phenomenon, and the noon-to-noon day axis removes the midnight wraparound
// from onset/offset arithmetic.

struct CivilDate {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
};

// days since 1970-01-01 (Howard Hinnant's algorithm)
std::int64_t days_from_civil(int y, int m, int d);
CivilDate civil_from_days(std::int64_t z);

// 0 = Sunday ... 6 = Saturday
int weekday_of_day(std::int64_t day);
inline bool is_weekend_day(std::int64_t day) {
    const int w = weekday_of_day(day);
    return w == 0 || w == 6;
}

// strict "YYYY-MM-DDTHH:MM:SSZ"; returns false on any deviation
bool parse_iso_utc(std::string_view s, std::int64_t& epoch_s);
std::string format_iso_utc(std::int64_t epoch_s);

std::string format_date(std::int64_t day);  // "YYYY-MM-DD"

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

inline std::int64_t local_seconds(std::int64_t epoch_s, int tz_offset_min) {
    return epoch_s + static_cast<std::int64_t>(tz_offset_min) * 60;
}

// local calendar day containing the instant
inline std::int64_t local_day(std::int64_t epoch_s, int tz_offset_min) {
    return floor_div(local_seconds(epoch_s, tz_offset_min), 86400);
}

// the noon-to-noon day an instant falls in, keyed by the calendar date the
// day's noon belongs to (23:00 of June 12 and 01:30 of June 13 share key June 12)
inline std::int64_t noon_day(std::int64_t epoch_s, int tz_offset_min) {
    return floor_div(local_seconds(epoch_s, tz_offset_min) - 43200, 86400);
}

// hours since 12:00 local of the given noon day (23:00 -> 11.0, 01:30 -> 13.5)
inline double noon_axis_hours(std::int64_t epoch_s, int tz_offset_min, std::int64_t key_day) {
    const std::int64_t noon_local = key_day * 86400 + 43200;
    return static_cast<double>(local_seconds(epoch_s, tz_offset_min) - noon_local) / 3600.0;
}

}  // namespace sleepassoc
