#include "nudge/pr_domain.hpp"

#include <algorithm>

#include "nudge/activity_detection.hpp"
#include "nudge/errors.hpp"
#include "nudge/feature_extraction.hpp"

namespace nudge {
namespace {

using nlohmann::json;

std::uint64_t churn_field(const json& churn, const char* key) {
    auto it = churn.find(key);
    if (it == churn.end()) return 0;
    return it->get<std::uint64_t>();
}

bool churn_flag(const json& churn, const char* key) {
    auto it = churn.find(key);
    return it != churn.end() && it->get<bool>();
}

ChurnSummary parse_churn(const json& payload) {
    const json& churn = payload.at("churn");
    ChurnSummary c;
    c.total_churn_lines = churn_field(churn, "total_churn_lines");
    c.lines_changed = churn_field(churn, "lines_changed");
    c.files_modified = churn_field(churn, "files_modified");
    c.distinct_paths = churn_field(churn, "distinct_paths");
    c.distinct_file_types = churn_field(churn, "distinct_file_types");
    c.methods_churned = churn_field(churn, "methods_churned");
    c.classes_touched = churn_field(churn, "classes_touched");
    c.conditionals_touched = churn_field(churn, "conditionals_touched");
    c.loops_touched = churn_field(churn, "loops_touched");
    c.references_changed = churn_field(churn, "references_changed");
    c.edits_csproj = churn_flag(churn, "edits_csproj");
    c.edits_config = churn_flag(churn, "edits_config");
    return c;
}

PrState derive_review_state(const std::map<std::string, int>& votes) {
    bool any_reject = false, any_wait = false, any_approve = false;
    for (const auto& [reviewer, value] : votes) {
        if (value == -10) any_reject = true;
        else if (value == -5) any_wait = true;
        else if (value > 0) any_approve = true;
    }
    if (any_reject) return PrState::Rejected;
    if (any_wait) return PrState::WaitingForAuthor;
    if (any_approve) return PrState::Approved;
    return PrState::Active;
}

void note_participant(PullRequestRecord& pr, const EventRecord& ev) {
    auto [it, inserted] = pr.participants.emplace(ev.actor_id, ev.actor_name);
    if (!inserted && it->second == it->first && ev.actor_name != ev.actor_id) {
        it->second = ev.actor_name;  // upgrade a defaulted name
    }
}

}  // namespace

bool is_terminal(PrState state) {
    return state == PrState::Merged || state == PrState::Abandoned;
}

std::string_view to_string(PrState state) {
    switch (state) {
        case PrState::Active: return "active";
        case PrState::WaitingForAuthor: return "waiting_for_author";
        case PrState::Approved: return "approved";
        case PrState::Rejected: return "rejected";
        case PrState::Merged: return "merged";
        case PrState::Abandoned: return "abandoned";
    }
    return "?";
}

PrState pr_state_from_string(std::string_view text) {
    for (PrState s : {PrState::Active, PrState::WaitingForAuthor, PrState::Approved,
                      PrState::Rejected, PrState::Merged, PrState::Abandoned}) {
        if (to_string(s) == text) return s;
    }
    throw ParseError("unknown PR state '" + std::string(text) + "'");
}

Actor make_actor(std::string id, std::string display_name, ActorKind role) {
    Actor a;
    a.id = std::move(id);
    a.display_name = std::move(display_name);
    a.kind = is_bot_name(a.display_name) ? ActorKind::Bot : role;
    return a;
}

bool is_valid_vote_value(int value) {
    return value == -10 || value == -5 || value == 0 || value == 5 || value == 10;
}

std::string_view to_string(ThreadStatus status) {
    switch (status) {
        case ThreadStatus::Active: return "active";
        case ThreadStatus::Pending: return "pending";
        case ThreadStatus::Resolved: return "resolved";
        case ThreadStatus::WontFix: return "wontfix";
        case ThreadStatus::Closed: return "closed";
    }
    return "?";
}

ThreadStatus thread_status_from_string(std::string_view text) {
    for (ThreadStatus s : {ThreadStatus::Active, ThreadStatus::Pending,
                           ThreadStatus::Resolved, ThreadStatus::WontFix,
                           ThreadStatus::Closed}) {
        if (to_string(s) == text) return s;
    }
    throw ParseError("unknown thread status '" + std::string(text) + "'");
}

const CommentThread* PullRequestRecord::find_thread(std::string_view thread_id) const {
    for (const CommentThread& t : threads) {
        if (t.id == thread_id) return &t;
    }
    return nullptr;
}

std::string PullRequestRecord::display_name_of(const std::string& actor_id) const {
    auto it = participants.find(actor_id);
    return it == participants.end() ? actor_id : it->second;
}

PullRequestRecord open_pull_request(const EventRecord& ev) {
    if (ev.kind != EventKind::Create) {
        throw IllegalTransition("pr " + ev.pr_id + ": first event must be create, got " +
                                std::string(to_string(ev.kind)));
    }
    const json& p = ev.payload;
    PullRequestRecord pr;
    pr.id = ev.pr_id;
    pr.repo_id = ev.repo_id;
    pr.author = make_actor(ev.actor_id, ev.actor_name, ActorKind::Author);
    pr.state = PrState::Active;
    pr.created_at = ev.timestamp;
    pr.last_event_at = ev.timestamp;
    pr.title = p.at("title").get<std::string>();
    pr.description = p.at("description").get<std::string>();
    for (const json& r : p.at("reviewers")) {
        if (r.is_string()) {
            const std::string id = r.get<std::string>();
            pr.required_reviewers.push_back(make_actor(id, id, ActorKind::Reviewer));
        } else {
            const std::string id = r.at("id").get<std::string>();
            std::string name = r.contains("name") ? r.at("name").get<std::string>() : id;
            pr.required_reviewers.push_back(make_actor(id, std::move(name), ActorKind::Reviewer));
        }
    }
    for (const json& path : p.at("paths")) {
        pr.project_paths.push_back(path.get<std::string>());
    }
    if (p.contains("author_team_join")) {
        pr.author_team_join = parse_rfc3339(p.at("author_team_join").get<std::string>());
    }
    if (p.contains("author_company_join")) {
        pr.author_company_join = parse_rfc3339(p.at("author_company_join").get<std::string>());
    }
    pr.intent_flags = classify_intent(pr.title, pr.description);
    pr.participants.emplace(pr.author.id, pr.author.display_name);
    for (const Actor& r : pr.required_reviewers) {
        pr.participants.emplace(r.id, r.display_name);
    }
    return pr;
}

std::map<std::string, int> current_votes(const PullRequestRecord& pr) {
    std::map<std::string, int> latest;
    for (const Vote& v : pr.votes) {  // votes are appended in apply order
        latest[v.reviewer] = v.value;
    }
    std::erase_if(latest, [](const auto& kv) { return kv.second == 0; });
    return latest;
}

PullRequestRecord apply_event(const PullRequestRecord& pr, const EventRecord& ev) {
    if (ev.pr_id != pr.id || ev.repo_id != pr.repo_id) {
        throw IllegalTransition("event addressed to " + ev.repo_id + "/" + ev.pr_id +
                                " applied to " + pr.repo_id + "/" + pr.id);
    }
    if (ev.timestamp < pr.last_event_at) {
        throw StaleEvent("pr " + pr.id + ": event at " + format_rfc3339(ev.timestamp) +
                         " precedes last applied event " + format_rfc3339(pr.last_event_at));
    }
    if (is_terminal(pr.state)) {
        throw IllegalTransition("pr " + pr.id + ": " + std::string(to_string(ev.kind)) +
                                " after terminal state " + std::string(to_string(pr.state)));
    }

    PullRequestRecord out = pr;
    out.last_event_at = ev.timestamp;
    note_participant(out, ev);

    switch (ev.kind) {
        case EventKind::Create:
            throw IllegalTransition("pr " + pr.id + ": duplicate create");

        case EventKind::UpdateIteration: {
            Iteration it;
            it.index = int(out.iterations.size()) + 1;
            it.pusher = ev.actor_id;
            it.timestamp = ev.timestamp;
            it.churn = parse_churn(ev.payload);
            out.iterations.push_back(std::move(it));
            if (pr.state != PrState::Active) out.state = PrState::Active;
            break;
        }

        case EventKind::Comment: {
            const std::string thread_id = ev.payload.at("thread_id").get<std::string>();
            const std::string text = ev.payload.at("text").get<std::string>();
            Comment c{ev.actor_id, text, ev.timestamp};
            bool appended = false;
            for (CommentThread& t : out.threads) {
                if (t.id == thread_id) {
                    t.comments.push_back(std::move(c));
                    appended = true;
                    break;
                }
            }
            if (!appended) {
                CommentThread t;
                t.id = thread_id;
                t.author = ev.actor_id;
                t.status = ThreadStatus::Active;
                t.is_vote_event = text.find("voted") != std::string::npos;
                if (t.is_vote_event) t.status = ThreadStatus::Closed;
                t.comments.push_back(std::move(c));
                out.threads.push_back(std::move(t));
            }
            break;
        }

        case EventKind::ThreadStatusChange: {
            const std::string thread_id = ev.payload.at("thread_id").get<std::string>();
            const ThreadStatus status =
                thread_status_from_string(ev.payload.at("status").get<std::string>());
            bool found = false;
            for (CommentThread& t : out.threads) {
                if (t.id == thread_id) {
                    t.status = status;
                    t.status_changed_at = ev.timestamp;
                    t.status_changed_by = ev.actor_id;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw IllegalTransition("pr " + pr.id + ": status change on unknown thread '" +
                                        thread_id + "'");
            }
            break;
        }

        case EventKind::Vote: {
            const int value = ev.payload.at("value").get<int>();
            if (!is_valid_vote_value(value)) {
                throw IllegalTransition("pr " + pr.id + ": invalid vote value " +
                                        std::to_string(value));
            }
            if (pr.state == PrState::Approved && value < 0) {
                throw IllegalTransition(
                    "pr " + pr.id +
                    ": negative vote on an approved PR; re-review requires an update");
            }
            out.votes.push_back(Vote{ev.actor_id, value, ev.timestamp});
            // The platform marks every vote with a closed "voted" thread.
            CommentThread marker;
            marker.id = "vote-" + std::to_string(out.votes.size());
            marker.author = ev.actor_id;
            marker.status = ThreadStatus::Closed;
            marker.is_vote_event = true;
            marker.comments.push_back(Comment{
                ev.actor_id,
                ev.actor_name + " voted " + std::to_string(value) + " on PR" + pr.id,
                ev.timestamp});
            out.threads.push_back(std::move(marker));
            out.state = derive_review_state(current_votes(out));
            break;
        }

        case EventKind::Merge: {
            if (pr.state != PrState::Approved) {
                throw IllegalTransition("pr " + pr.id + ": merge from " +
                                        std::string(to_string(pr.state)) +
                                        " (only approved PRs merge)");
            }
            out.state = PrState::Merged;
            out.closed_at = ev.timestamp;
            break;
        }

        case EventKind::Abandon: {
            out.state = PrState::Abandoned;
            out.closed_at = ev.timestamp;
            break;
        }
    }
    return out;
}

double lifetime_hours(const PullRequestRecord& pr, Instant as_of,
                      const CalendarPolicy& policy) {
    Instant end = as_of;
    if (pr.closed_at && *pr.closed_at < end) end = *pr.closed_at;
    if (end <= pr.created_at) return 0.0;
    return business_hours_between(pr.created_at, end, policy);
}

}  // namespace nudge
