#include "nudge/actor_identification.hpp"

#include <algorithm>
#include <set>

#include "nudge/activity_detection.hpp"
#include "nudge/errors.hpp"

namespace nudge {
namespace {

// A discussion thread counts as a reviewer thread when a non-bot actor other
// than the PR author opened it. Vote marker threads never count.
bool reviewer_thread(const PullRequestRecord& pr, const CommentThread& t) {
    if (t.is_vote_event) return false;
    if (t.author == pr.author.id) return false;
    return !is_bot_name(pr.display_name_of(t.author));
}

std::vector<std::string> all_required_reviewers(const PullRequestRecord& pr) {
    std::vector<std::string> out;
    for (const Actor& r : pr.required_reviewers) out.push_back(r.id);
    return out;
}

}  // namespace

std::string_view to_string(BlockerClass c) {
    switch (c) {
        case BlockerClass::UnaddressedComments: return "unaddressed_comments";
        case BlockerClass::NeedsDiscussion: return "needs_discussion";
        case BlockerClass::ApprovedNotMerged: return "approved_not_merged";
        case BlockerClass::ReviewNotStarted: return "review_not_started";
        case BlockerClass::AddressedNotApproved: return "addressed_not_approved";
    }
    return "?";
}

BlockerVerdict identify(const PullRequestRecord& pr) {
    if (is_terminal(pr.state)) {
        throw TerminalPr("pr " + pr.id + " is " + std::string(to_string(pr.state)));
    }

    const std::map<std::string, int> votes = current_votes(pr);
    bool any_approval = false, any_negative = false, any_wait_marker = false;
    for (const auto& [reviewer, value] : votes) {
        if (value > 0) any_approval = true;
        if (value < 0) any_negative = true;
        if (value == -5) any_wait_marker = true;
    }

    bool any_open_reviewer_thread = false;
    bool any_reviewer_thread = false;
    bool all_threads_resolved = true;
    std::set<std::string> commenting_reviewers;
    for (const CommentThread& t : pr.threads) {
        if (t.is_vote_event) continue;
        const bool open = t.status == ThreadStatus::Active || t.status == ThreadStatus::Pending;
        if (open) all_threads_resolved = false;
        if (!reviewer_thread(pr, t)) continue;
        any_reviewer_thread = true;
        commenting_reviewers.insert(t.author);
        if (open) any_open_reviewer_thread = true;
    }

    BlockerVerdict verdict;
    if (any_approval && !any_negative) {
        verdict.blocker_class = BlockerClass::ApprovedNotMerged;
        verdict.waiting_on = WaitingOn::Author;
        verdict.actors = {pr.author.id};
    } else if (any_open_reviewer_thread) {
        verdict.blocker_class = BlockerClass::UnaddressedComments;
        verdict.waiting_on = WaitingOn::Author;
        verdict.actors = {pr.author.id};
    } else if (any_wait_marker && all_threads_resolved) {
        verdict.blocker_class = BlockerClass::NeedsDiscussion;
        verdict.waiting_on = WaitingOn::Author;
        verdict.actors = {pr.author.id};
    } else if (!any_reviewer_thread && votes.empty()) {
        verdict.blocker_class = BlockerClass::ReviewNotStarted;
        verdict.waiting_on = WaitingOn::Reviewers;
        verdict.actors = all_required_reviewers(pr);
    } else {
        verdict.blocker_class = BlockerClass::AddressedNotApproved;
        verdict.waiting_on = WaitingOn::Reviewers;
        verdict.actors.assign(commenting_reviewers.begin(), commenting_reviewers.end());
        if (verdict.actors.empty()) verdict.actors = all_required_reviewers(pr);
    }

    if (verdict.actors.empty()) {
        // A PR with no reviewers at all: the author must add some.
        verdict.waiting_on = WaitingOn::Author;
        verdict.actors = {pr.author.id};
    }
    return verdict;
}

}  // namespace nudge
