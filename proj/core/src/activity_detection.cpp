#include "nudge/activity_detection.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

namespace nudge {
namespace {

void consider(std::optional<Instant>& slot, Instant t) {
    if (!slot || *slot < t) slot = t;
}

}  // namespace

bool is_bot_name(std::string_view display_name) {
    static constexpr std::array<std::string_view, 3> markers = {"system", "bot",
                                                                "account"};
    std::string lower(display_name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    for (std::string_view marker : markers) {
        if (lower.find(marker) != std::string::npos) return true;
    }
    return false;
}

ActivitySnapshot latest_activity(const PullRequestRecord& pr) {
    ActivitySnapshot snap;
    for (const Iteration& it : pr.iterations) {
        consider(snap.last_commit_at, it.timestamp);
    }
    for (const CommentThread& t : pr.threads) {
        if (t.is_vote_event) {
            // "voted" marker threads signal a state change.
            if (!t.comments.empty()) {
                consider(snap.last_state_change_at, t.comments.front().timestamp);
            }
            continue;
        }
        for (const Comment& c : t.comments) {
            if (is_bot_name(pr.display_name_of(c.author))) continue;
            consider(snap.last_comment_at, c.timestamp);
        }
        if (t.status_changed_at &&
            !is_bot_name(pr.display_name_of(t.status_changed_by))) {
            consider(snap.last_comment_at, *t.status_changed_at);
        }
    }
    for (const std::optional<Instant>& component :
         {snap.last_commit_at, snap.last_comment_at, snap.last_state_change_at}) {
        if (component) consider(snap.last_any, *component);
    }
    return snap;
}

bool is_quiet(const PullRequestRecord& pr, Instant now, double quiet_hours) {
    const ActivitySnapshot snap = latest_activity(pr);
    if (!snap.last_any) return true;
    const double elapsed = double((now - *snap.last_any).count()) / 3600.0;
    return elapsed >= quiet_hours;
}

}  // namespace nudge
