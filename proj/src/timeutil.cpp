#include "sleepassoc/timeutil.hpp"

#include <cstdio>

namespace sleepassoc {

std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                         static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

int weekday_of_day(std::int64_t day) {
    // day 0 = 1970-01-01 = Thursday
    return static_cast<int>(((day % 7) + 11) % 7);
}

namespace {

bool all_digits(std::string_view s) {
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return !s.empty();
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

}  // namespace

bool parse_iso_utc(std::string_view s, std::int64_t& epoch_s) {
    // YYYY-MM-DDTHH:MM:SSZ
    if (s.size() != 20) return false;
    if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':' ||
        s[19] != 'Z') {
        return false;
    }
    const auto ys = s.substr(0, 4), ms = s.substr(5, 2), ds = s.substr(8, 2);
    const auto hs = s.substr(11, 2), mis = s.substr(14, 2), ss = s.substr(17, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds) || !all_digits(hs) ||
        !all_digits(mis) || !all_digits(ss)) {
        return false;
    }
    const int y = to_int(ys), mo = to_int(ms), d = to_int(ds);
    const int h = to_int(hs), mi = to_int(mis), sec = to_int(ss);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return false;
    // round-trip through the civil conversion to reject e.g. Feb 30
    const std::int64_t day = days_from_civil(y, mo, d);
    const CivilDate back = civil_from_days(day);
    if (back.year != y || back.month != mo || back.day != d) return false;
    epoch_s = day * 86400 + h * 3600 + mi * 60 + sec;
    return true;
}

std::string format_iso_utc(std::int64_t epoch_s) {
    const std::int64_t day = floor_div(epoch_s, 86400);
    const std::int64_t sod = epoch_s - day * 86400;
    const CivilDate c = civil_from_days(day);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

std::string format_date(std::int64_t day) {
    const CivilDate c = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

}  // namespace sleepassoc
