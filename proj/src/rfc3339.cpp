#include "engage/rfc3339.hpp"

#include <cctype>
#include <cstdio>

namespace engage {

// Howard Hinnant's chrono-compatible civil calendar algorithms.
int64_t days_from_civil(const CivilDate& d) {
    int y = d.year;
    const int m = d.month;
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

CivilDate civil_from_days(int64_t z) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                     static_cast<int>(day)};
}

int weekday_from_days(int64_t z) {
    // 1970-01-01 was a Thursday; map to 0 = Monday.
    int64_t wd = (z + 3) % 7;
    if (wd < 0) wd += 7;
    return static_cast<int>(wd);
}

namespace {

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t floor_mod(int64_t a, int64_t b) {
    int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) r += b;
    return r;
}

bool read_digits(const std::string& s, size_t pos, size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (size_t i = 0; i < n; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

bool valid_ymd(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1) return false;
    static const int md[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int maxd = md[m - 1];
    if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) maxd = 29;
    return d <= maxd;
}

}  // namespace

CivilDate Timestamp::local_date() const {
    return civil_from_days(floor_div(local_s(), 86400));
}

int Timestamp::local_minute_of_day() const {
    return static_cast<int>(floor_mod(local_s(), 86400) / 60);
}

double Timestamp::local_hour_of_day() const {
    int m = local_minute_of_day();
    return (m / 60) + (m % 60) / 60.0;
}

int Timestamp::local_weekday() const {
    return weekday_from_days(floor_div(local_s(), 86400));
}

std::optional<Timestamp> parse_rfc3339(const std::string& s) {
    int y, mo, d, h, mi, se;
    if (!read_digits(s, 0, 4, y)) return std::nullopt;
    if (s.size() < 20 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!read_digits(s, 5, 2, mo) || !read_digits(s, 8, 2, d)) return std::nullopt;
    char sep = s[10];
    if (sep != 'T' && sep != 't' && sep != ' ') return std::nullopt;
    if (!read_digits(s, 11, 2, h) || s[13] != ':' || !read_digits(s, 14, 2, mi) ||
        s[16] != ':' || !read_digits(s, 17, 2, se))
        return std::nullopt;
    if (!valid_ymd(y, mo, d) || h > 23 || mi > 59 || se > 60) return std::nullopt;
    if (se == 60) se = 59;  // leap second, clamp
    size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == start) return std::nullopt;
    }
    if (pos >= s.size()) return std::nullopt;
    int32_t offset_min = 0;
    char c = s[pos];
    if (c == 'Z' || c == 'z') {
        ++pos;
    } else if (c == '+' || c == '-') {
        int oh, om;
        if (!read_digits(s, pos + 1, 2, oh) || pos + 5 >= s.size() ||
            s[pos + 3] != ':' || !read_digits(s, pos + 4, 2, om))
            return std::nullopt;
        if (oh > 23 || om > 59) return std::nullopt;
        offset_min = oh * 60 + om;
        if (c == '-') offset_min = -offset_min;
        pos += 6;
    } else {
        return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
    int64_t days = days_from_civil(CivilDate{y, mo, d});
    int64_t local = days * 86400 + h * 3600 + mi * 60 + se;
    return Timestamp{local - int64_t{offset_min} * 60, offset_min};
}

std::string format_rfc3339(const Timestamp& ts) {
    int64_t local = ts.local_s();
    CivilDate d = civil_from_days(floor_div(local, 86400));
    int64_t sod = floor_mod(local, 86400);
    char buf[40];
    int n = std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d",
                          d.year, d.month, d.day, static_cast<int>(sod / 3600),
                          static_cast<int>((sod / 60) % 60),
                          static_cast<int>(sod % 60));
    std::string out(buf, n);
    if (ts.offset_min == 0) {
        out += 'Z';
    } else {
        int32_t off = ts.offset_min;
        char sign = off < 0 ? '-' : '+';
        if (off < 0) off = -off;
        std::snprintf(buf, sizeof buf, "%c%02d:%02d", sign, off / 60, off % 60);
        out += buf;
    }
    return out;
}

std::optional<CivilDate> parse_date(const std::string& s) {
    int y, m, d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!read_digits(s, 0, 4, y) || !read_digits(s, 5, 2, m) || !read_digits(s, 8, 2, d))
        return std::nullopt;
    if (!valid_ymd(y, m, d)) return std::nullopt;
    return CivilDate{y, m, d};
}

std::string format_date(const CivilDate& d) {
    char buf[16];
    int n = std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return std::string(buf, n);
}

}  // namespace engage
