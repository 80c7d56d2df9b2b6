#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace nudge {

/// UTC instant at second resolution. All event timestamps live on this type.
using Instant = std::chrono::sys_seconds;

/// Parses an RFC 3339 timestamp with a `Z` suffix, e.g. "2024-03-01T09:30:00Z".
/// Fractional seconds are accepted and truncated. Throws ParseError otherwise.
Instant parse_rfc3339(std::string_view text);

/// Formats an instant as RFC 3339 with a `Z` suffix.
std::string format_rfc3339(Instant t);

/// Fixed-offset timezone used for calendar math (weekends, business hours).
/// The default is UTC; repositories in other timezones configure the offset.
struct CalendarPolicy {
    std::chrono::minutes utc_offset{0};
};

/// Seconds of the interval [begin, end) that fall inside a weekend window.
/// A weekend spans Saturday 00:00 to Monday 00:00 in the policy timezone.
std::int64_t weekend_overlap_seconds(Instant begin, Instant end,
                                     const CalendarPolicy& policy = {});

/// Elapsed hours between two instants with weekend hours removed.
double business_hours_between(Instant begin, Instant end,
                              const CalendarPolicy& policy = {});

/// Day of week of `t` in the policy timezone, encoded Sunday=0 .. Saturday=6.
int day_of_week(Instant t, const CalendarPolicy& policy = {});

/// True when `t` falls Monday-Friday within [09:00, 17:00) local time.
bool within_business_hours(Instant t, const CalendarPolicy& policy = {});

/// True when `t` lies inside a Saturday 00:00 - Monday 00:00 window.
bool is_weekend(Instant t, const CalendarPolicy& policy = {});

/// Advances `from` by `hours` of non-weekend time; weekend spans are skipped
/// so that business_hours_between(from, result) == hours. Used by agents that
/// are inactive over weekends.
Instant advance_business_hours(Instant from, double hours,
                               const CalendarPolicy& policy = {});

}  // namespace nudge
