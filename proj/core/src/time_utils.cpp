#include "nudge/time_utils.hpp"

#include <cmath>
#include <cstdio>

#include "nudge/errors.hpp"

namespace nudge {
namespace {

using std::chrono::days;
using std::chrono::hours;
using std::chrono::minutes;
using std::chrono::seconds;
using std::chrono::sys_days;

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kWeek = 7 * kDay;
constexpr std::int64_t kWeekend = 2 * kDay;
// Monday 1969-12-29T00:00Z, the week anchor for weekend arithmetic.
constexpr std::int64_t kMondayAnchor = -3 * kDay;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t local_seconds(Instant t, const CalendarPolicy& policy) {
    return t.time_since_epoch().count() + policy.utc_offset.count() * 60;
}

// Total weekend seconds in [anchor, s). Monotone in s, so the weekend
// overlap of any interval is a difference of two lookups.
std::int64_t weekend_seconds_before(std::int64_t s) {
    const std::int64_t rel = s - kMondayAnchor;
    const std::int64_t week = floor_div(rel, kWeek);
    const std::int64_t rem = rel - week * kWeek;  // in [0, kWeek)
    const std::int64_t sat = 5 * kDay;
    std::int64_t within = rem - sat;
    if (within < 0) within = 0;
    if (within > kWeekend) within = kWeekend;
    return week * kWeekend + within;
}

}  // namespace

Instant parse_rfc3339(std::string_view text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char tz = '\0';
    // Accepts 2024-03-01T09:30:00Z and fractional seconds.
    std::string buf(text);
    int n = std::sscanf(buf.c_str(), "%d-%d-%dT%d:%d:%lf%c", &y, &mo, &d, &h,
                        &mi, &sec, &tz);
    if (n != 7 || (tz != 'Z' && tz != 'z')) {
        throw ParseError("invalid RFC 3339 timestamp: '" + buf + "'");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 ||
        sec < 0.0 || sec >= 61.0) {
        throw ParseError("timestamp field out of range: '" + buf + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{unsigned(mo)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) {
        throw ParseError("invalid calendar date: '" + buf + "'");
    }
    const sys_days day{ymd};
    return Instant{day.time_since_epoch() + hours{h} + minutes{mi} +
                   seconds{static_cast<std::int64_t>(sec)}};
}

std::string format_rfc3339(Instant t) {
    const sys_days day = std::chrono::floor<days>(t);
    const std::chrono::year_month_day ymd{day};
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ldZ",
                  int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                  long(hms.hours().count()), long(hms.minutes().count()),
                  long(hms.seconds().count()));
    return buf;
}

std::int64_t weekend_overlap_seconds(Instant begin, Instant end,
                                     const CalendarPolicy& policy) {
    if (end <= begin) return 0;
    return weekend_seconds_before(local_seconds(end, policy)) -
           weekend_seconds_before(local_seconds(begin, policy));
}

double business_hours_between(Instant begin, Instant end,
                              const CalendarPolicy& policy) {
    if (end <= begin) return 0.0;
    const std::int64_t raw = (end - begin).count();
    const std::int64_t weekend = weekend_overlap_seconds(begin, end, policy);
    return double(raw - weekend) / 3600.0;
}

int day_of_week(Instant t, const CalendarPolicy& policy) {
    const std::int64_t s = local_seconds(t, policy);
    const sys_days day{days{floor_div(s, kDay)}};
    return int(std::chrono::weekday{day}.c_encoding());  // Sunday=0
}

bool within_business_hours(Instant t, const CalendarPolicy& policy) {
    const int dow = day_of_week(t, policy);
    if (dow == 0 || dow == 6) return false;
    const std::int64_t s = local_seconds(t, policy);
    const std::int64_t sod = s - floor_div(s, kDay) * kDay;
    return sod >= 9 * 3600 && sod < 17 * 3600;
}

bool is_weekend(Instant t, const CalendarPolicy& policy) {
    const int dow = day_of_week(t, policy);
    return dow == 0 || dow == 6;
}

Instant advance_business_hours(Instant from, double hours,
                               const CalendarPolicy& policy) {
    std::int64_t remaining = std::llround(hours * 3600.0);
    if (remaining <= 0) return from;
    std::int64_t s = local_seconds(from, policy);
    const std::int64_t tz = policy.utc_offset.count() * 60;
    while (true) {
        const std::int64_t rel = s - kMondayAnchor;
        const std::int64_t week = floor_div(rel, kWeek);
        const std::int64_t rem = rel - week * kWeek;
        const std::int64_t sat = 5 * kDay;
        if (rem >= sat) {
            // Inside a weekend: jump to Monday 00:00.
            s = kMondayAnchor + (week + 1) * kWeek;
            continue;
        }
        const std::int64_t until_weekend = sat - rem;
        if (remaining <= until_weekend) {
            s += remaining;
            break;
        }
        remaining -= until_weekend;
        s = kMondayAnchor + week * kWeek + sat + kWeekend;
    }
    return Instant{seconds{s - tz}};
}

}  // namespace nudge
