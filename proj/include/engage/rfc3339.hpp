#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace engage {

// Calendar date in the proleptic Gregorian calendar.
struct CivilDate {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    bool operator==(const CivilDate&) const = default;
    auto operator<=>(const CivilDate&) const = default;
};

// Days since 1970-01-01 (negative before the epoch).
int64_t days_from_civil(const CivilDate& d);
CivilDate civil_from_days(int64_t days);

// 0 = Monday .. 6 = Sunday.
int weekday_from_days(int64_t days);

// A point in time with second precision. epoch_s is UTC seconds since the
// Unix epoch; offset_min is the UTC offset the record was written with,
// kept so local wall-clock time can be recovered.
struct Timestamp {
    int64_t epoch_s = 0;
    int32_t offset_min = 0;

    bool operator==(const Timestamp&) const = default;
    auto operator<=>(const Timestamp& o) const { return epoch_s <=> o.epoch_s; }

    int64_t local_s() const { return epoch_s + int64_t{offset_min} * 60; }
    CivilDate local_date() const;
    // Minutes past local midnight, [0, 1440).
    int local_minute_of_day() const;
    // Hour + minute/60 of local wall-clock time, [0, 24).
    double local_hour_of_day() const;
    // 0 = Monday .. 6 = Sunday, local.
    int local_weekday() const;
};

// Parses an RFC 3339 timestamp ("2025-03-04T13:45:00+08:00", "...Z").
// Fractional seconds are accepted and truncated. Returns nullopt on any
// syntax or range error.
std::optional<Timestamp> parse_rfc3339(const std::string& s);

// Canonical form: second precision, "Z" for a zero offset.
std::string format_rfc3339(const Timestamp& ts);

// "YYYY-MM-DD" only.
std::optional<CivilDate> parse_date(const std::string& s);
std::string format_date(const CivilDate& d);

}  // namespace engage
