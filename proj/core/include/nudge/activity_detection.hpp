#pragma once

#include <optional>
#include <string_view>

#include "nudge/pr_domain.hpp"
#include "nudge/time_utils.hpp"

namespace nudge {

/// Bot heuristic: display name contains "system", "bot" or "account",
/// case-insensitively.
bool is_bot_name(std::string_view display_name);

/// The most recent activity observed at each collaboration point.
/// PR creation itself does not count as activity.
struct ActivitySnapshot {
    std::optional<Instant> last_commit_at;        ///< latest iteration
    std::optional<Instant> last_comment_at;       ///< non-bot comments and thread status changes
    std::optional<Instant> last_state_change_at;  ///< "voted" marker threads
    std::optional<Instant> last_any;              ///< max of the present components

    bool operator==(const ActivitySnapshot&) const = default;
};

/// Pure function of the record; reads no clock.
ActivitySnapshot latest_activity(const PullRequestRecord& pr);

/// True iff there was no activity within the quiet window: no activity at
/// all, or now - last_any >= quiet_hours (the boundary counts as quiet).
/// Quiet time is raw wall-clock, not weekend-adjusted.
bool is_quiet(const PullRequestRecord& pr, Instant now, double quiet_hours = 24.0);

}  // namespace nudge
