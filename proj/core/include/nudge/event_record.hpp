#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "nudge/time_utils.hpp"

namespace nudge {

/// The seven collaboration event kinds the offline adapter understands.
enum class EventKind {
    Create,
    UpdateIteration,
    Comment,
    ThreadStatusChange,
    Vote,
    Merge,
    Abandon,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

/// Stable ordering rank used to break ties between events that share a
/// timestamp within one PR: create < update < comment < thread status
/// change < vote < merge/abandon.
int tie_break_rank(EventKind kind);

/// One timestamped collaboration event, the unit of ingestion. Maps 1:1 to
/// one line of the JSONL event-log format.
struct EventRecord {
    std::string repo_id;
    std::string pr_id;
    EventKind kind = EventKind::Create;
    std::string actor_id;
    std::string actor_name;  ///< display name; defaults to actor_id
    Instant timestamp{};
    nlohmann::json payload = nlohmann::json::object();  ///< kind-specific, validated at parse time

    /// Identity used for ingest deduplication.
    std::string dedup_key() const;

    bool operator==(const EventRecord&) const = default;
};

/// Parses one JSONL line. Validates the kind-specific payload contract:
///   create:               title, description, reviewers, paths
///   update_iteration:     churn object (absent counters default to zero)
///   comment:              thread_id, text
///   thread_status_change: thread_id, status
///   vote:                 value in {-10, -5, 0, 5, 10}
/// Throws ParseError with the supplied line number on violation.
EventRecord parse_event(std::string_view line, int line_number = -1);

nlohmann::json to_json(const EventRecord& ev);

/// Canonical single-line serialization (keys sorted, no whitespace).
std::string to_jsonl(const EventRecord& ev);

}  // namespace nudge
