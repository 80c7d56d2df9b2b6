#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/event_record.hpp"
#include "nudge/time_utils.hpp"

namespace nudge {

/// Lifecycle states of a pull request. Merged and Abandoned are terminal;
/// Merged is reachable only from Approved.
enum class PrState {
    Active,
    WaitingForAuthor,
    Approved,
    Rejected,
    Merged,
    Abandoned,
};

bool is_terminal(PrState state);
std::string_view to_string(PrState state);
PrState pr_state_from_string(std::string_view text);

enum class ActorKind { Author, Reviewer, Bot };

/// A participant in the review. kind is Bot iff the display name matches the
/// bot heuristic (see activity_detection).
struct Actor {
    std::string id;
    ActorKind kind = ActorKind::Reviewer;
    std::string display_name;

    bool operator==(const Actor&) const = default;
};

/// Builds an actor, deriving Bot from the display-name heuristic.
Actor make_actor(std::string id, std::string display_name, ActorKind role);

/// A reviewer verdict. Values follow the voting scale: -10 rejected,
/// -5 waiting for author, 0 no vote, 5 approved with suggestions,
/// 10 approved.
struct Vote {
    std::string reviewer;
    int value = 0;
    Instant timestamp{};

    bool operator==(const Vote&) const = default;
};

bool is_valid_vote_value(int value);

enum class ThreadStatus { Active, Pending, Resolved, WontFix, Closed };

std::string_view to_string(ThreadStatus status);
ThreadStatus thread_status_from_string(std::string_view text);

struct Comment {
    std::string author;
    std::string text;
    Instant timestamp{};

    bool operator==(const Comment&) const = default;
};

/// A comment thread. is_vote_event is true iff the first comment's text
/// contains the token "voted" (the marker the platform leaves for state
/// changes).
struct CommentThread {
    std::string id;
    std::string author;
    ThreadStatus status = ThreadStatus::Active;
    std::vector<Comment> comments;  ///< non-empty, timestamp-ordered
    bool is_vote_event = false;
    std::optional<Instant> status_changed_at;
    std::string status_changed_by;

    bool operator==(const CommentThread&) const = default;
};

/// Churn counters attached to one iteration. The distinct_* fields are set
/// cardinalities reported by the diff tooling, not derivable from the other
/// counters.
struct ChurnSummary {
    std::uint64_t total_churn_lines = 0;
    std::uint64_t lines_changed = 0;
    std::uint64_t files_modified = 0;
    std::uint64_t distinct_paths = 0;
    std::uint64_t distinct_file_types = 0;
    std::uint64_t methods_churned = 0;
    std::uint64_t classes_touched = 0;
    std::uint64_t conditionals_touched = 0;
    std::uint64_t loops_touched = 0;
    std::uint64_t references_changed = 0;
    bool edits_csproj = false;
    bool edits_config = false;

    bool operator==(const ChurnSummary&) const = default;
};

/// One pushed update. Indices are contiguous from 1.
struct Iteration {
    int index = 0;
    std::string pusher;
    Instant timestamp{};
    ChurnSummary churn;

    bool operator==(const Iteration&) const = default;
};

struct IntentFlags {
    bool is_bug_fix = false;
    bool is_feature = false;
    bool is_refactor = false;
    bool is_deprecation = false;
    bool is_merge_change = false;

    bool operator==(const IntentFlags&) const = default;
};

/// Full event-sourced state of one pull request. Records are immutable
/// values: apply_event returns a new record, so snapshots are safe to share
/// across threads.
struct PullRequestRecord {
    std::string id;
    std::string repo_id;
    Actor author;
    std::vector<Actor> required_reviewers;
    PrState state = PrState::Active;
    Instant created_at{};
    std::optional<Instant> closed_at;  ///< present iff Merged or Abandoned
    std::string title;
    std::string description;
    std::vector<CommentThread> threads;
    std::vector<Iteration> iterations;
    std::vector<Vote> votes;
    std::vector<std::string> project_paths;
    IntentFlags intent_flags;
    /// Display names of every actor seen on this PR, for bot classification.
    std::map<std::string, std::string> participants;
    std::optional<Instant> author_team_join;
    std::optional<Instant> author_company_join;
    Instant last_event_at{};

    bool operator==(const PullRequestRecord&) const = default;

    const CommentThread* find_thread(std::string_view thread_id) const;
    std::string display_name_of(const std::string& actor_id) const;
};

/// Builds a fresh record from a create event. The PR enters at Active.
PullRequestRecord open_pull_request(const EventRecord& create_event);

/// Applies one event and returns the updated record.
///
/// Transitions follow the lifecycle figure: vote events re-derive the review
/// state from each reviewer's latest vote (any -10 outstanding -> Rejected,
/// else any -5 -> WaitingForAuthor, else any 5/10 -> Approved, else Active);
/// update events move WaitingForAuthor/Rejected/Approved back to Active;
/// merge moves Approved to Merged; abandon moves any non-terminal state to
/// Abandoned. A negative vote on an Approved PR is rejected: re-review is
/// reachable only through an update.
///
/// Throws IllegalTransition or StaleEvent (timestamp regression).
PullRequestRecord apply_event(const PullRequestRecord& pr, const EventRecord& ev);

/// Latest nonzero vote per reviewer (a zero vote clears that reviewer's
/// outstanding vote). Shared by the state machine and actor identification.
std::map<std::string, int> current_votes(const PullRequestRecord& pr);

/// Elapsed hours from created_at to min(as_of, closed_at) with weekend hours
/// excluded. Partial weekend overlap subtracts exactly the overlapped hours.
double lifetime_hours(const PullRequestRecord& pr, Instant as_of,
                      const CalendarPolicy& policy = {});

}  // namespace nudge
