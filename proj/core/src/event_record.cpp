#include "nudge/event_record.hpp"

#include <array>

#include "nudge/errors.hpp"
#include "nudge/pr_domain.hpp"

namespace nudge {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 7> kKindNames = {
    "create", "update_iteration",     "comment", "thread_status_change",
    "vote",   "merge",               "abandon"};

[[noreturn]] void fail(const std::string& msg, int line) {
    throw ParseError(msg, line);
}

bool valid_identifier(std::string_view s) {
    if (s.empty() || s.size() > 256) return false;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                        c == '.';
        if (!ok) return false;
    }
    return true;
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::string require_string(const json& obj, const char* key, int line) {
    const json* v = find(obj, key);
    if (!v || !v->is_string()) {
        fail(std::string("missing or non-string field '") + key + "'", line);
    }
    return v->get<std::string>();
}

void validate_payload(EventKind kind, const json& payload, int line) {
    switch (kind) {
        case EventKind::Create: {
            require_string(payload, "title", line);
            require_string(payload, "description", line);
            const json* reviewers = find(payload, "reviewers");
            if (!reviewers || !reviewers->is_array()) {
                fail("create payload needs a 'reviewers' array", line);
            }
            for (const json& r : *reviewers) {
                if (r.is_string()) continue;
                if (r.is_object() && find(r, "id") && (*find(r, "id")).is_string()) continue;
                fail("reviewer entries must be ids or {id, name} objects", line);
            }
            const json* paths = find(payload, "paths");
            if (!paths || !paths->is_array()) {
                fail("create payload needs a 'paths' array", line);
            }
            for (const json& p : *paths) {
                if (!p.is_string()) fail("paths entries must be strings", line);
            }
            for (const char* key : {"author_team_join", "author_company_join"}) {
                if (const json* v = find(payload, key)) {
                    if (!v->is_string()) fail(std::string(key) + " must be a timestamp string", line);
                    parse_rfc3339(v->get<std::string>());
                }
            }
            break;
        }
        case EventKind::UpdateIteration: {
            const json* churn = find(payload, "churn");
            if (!churn || !churn->is_object()) {
                fail("update_iteration payload needs a 'churn' object", line);
            }
            for (auto& [key, value] : churn->items()) {
                if (key == "edits_csproj" || key == "edits_config") {
                    if (!value.is_boolean()) fail("churn." + key + " must be boolean", line);
                } else if (!value.is_number_unsigned() &&
                           !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
                    fail("churn." + key + " must be a non-negative integer", line);
                }
            }
            break;
        }
        case EventKind::Comment: {
            require_string(payload, "thread_id", line);
            require_string(payload, "text", line);
            break;
        }
        case EventKind::ThreadStatusChange: {
            require_string(payload, "thread_id", line);
            const std::string status = require_string(payload, "status", line);
            thread_status_from_string(status);  // throws on junk
            break;
        }
        case EventKind::Vote: {
            const json* v = find(payload, "value");
            if (!v || !v->is_number_integer()) {
                fail("vote payload needs an integer 'value'", line);
            }
            if (!is_valid_vote_value(v->get<int>())) {
                fail("vote value must be one of {-10, -5, 0, 5, 10}", line);
            }
            break;
        }
        case EventKind::Merge:
        case EventKind::Abandon:
            break;
    }
}

}  // namespace

std::string_view to_string(EventKind kind) {
    return kKindNames[static_cast<std::size_t>(kind)];
}

EventKind event_kind_from_string(std::string_view text) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == text) return static_cast<EventKind>(i);
    }
    throw ParseError("unknown event kind '" + std::string(text) + "'");
}

int tie_break_rank(EventKind kind) {
    switch (kind) {
        case EventKind::Create: return 0;
        case EventKind::UpdateIteration: return 1;
        case EventKind::Comment: return 2;
        case EventKind::ThreadStatusChange: return 3;
        case EventKind::Vote: return 4;
        case EventKind::Merge:
        case EventKind::Abandon: return 5;
    }
    return 6;
}

std::string EventRecord::dedup_key() const {
    std::string key;
    key.reserve(repo_id.size() + pr_id.size() + actor_id.size() + 32);
    key += repo_id;
    key += '\x1f';
    key += pr_id;
    key += '\x1f';
    key += to_string(kind);
    key += '\x1f';
    key += std::to_string(timestamp.time_since_epoch().count());
    key += '\x1f';
    key += actor_id;
    return key;
}

EventRecord parse_event(std::string_view line, int line_number) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        fail("line is not a JSON object", line_number);
    }
    EventRecord ev;
    try {
        ev.repo_id = require_string(doc, "repo_id", line_number);
        ev.pr_id = require_string(doc, "pr_id", line_number);
        ev.kind = event_kind_from_string(require_string(doc, "kind", line_number));
        ev.actor_id = require_string(doc, "actor_id", line_number);
        ev.timestamp = parse_rfc3339(require_string(doc, "timestamp", line_number));
    } catch (const ParseError& e) {
        fail(e.what(), line_number);
    }
    if (!valid_identifier(ev.repo_id) || !valid_identifier(ev.pr_id)) {
        fail("repo_id/pr_id must match [A-Za-z0-9._-]+", line_number);
    }
    if (const json* name = find(doc, "actor_name")) {
        if (!name->is_string()) fail("actor_name must be a string", line_number);
        ev.actor_name = name->get<std::string>();
    } else {
        ev.actor_name = ev.actor_id;
    }
    if (const json* payload = find(doc, "payload")) {
        if (!payload->is_object()) fail("payload must be an object", line_number);
        ev.payload = *payload;
    } else {
        ev.payload = json::object();
    }
    validate_payload(ev.kind, ev.payload, line_number);
    return ev;
}

json to_json(const EventRecord& ev) {
    json doc;
    doc["repo_id"] = ev.repo_id;
    doc["pr_id"] = ev.pr_id;
    doc["kind"] = std::string(to_string(ev.kind));
    doc["actor_id"] = ev.actor_id;
    if (ev.actor_name != ev.actor_id) doc["actor_name"] = ev.actor_name;
    doc["timestamp"] = format_rfc3339(ev.timestamp);
    if (!ev.payload.empty()) doc["payload"] = ev.payload;
    return doc;
}

std::string to_jsonl(const EventRecord& ev) {
    return to_json(ev).dump();
}

}  // namespace nudge
