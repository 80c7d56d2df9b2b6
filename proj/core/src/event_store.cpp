#include "nudge/event_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "nudge/errors.hpp"

namespace nudge {
namespace {

using nlohmann::json;

bool event_order(const EventRecord& a, const EventRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return tie_break_rank(a.kind) < tie_break_rank(b.kind);
}

json ledger_entry_to_json(const LedgerEntry& e) {
    json doc;
    doc["repo_id"] = e.repo_id;
    doc["pr_id"] = e.pr_id;
    doc["notified_at"] = format_rfc3339(e.notified_at);
    doc["actors"] = e.actors;
    doc["resolution"] = std::string(to_string(e.resolution));
    return doc;
}

LedgerEntry ledger_entry_from_json(const json& doc) {
    LedgerEntry e;
    e.repo_id = doc.at("repo_id").get<std::string>();
    e.pr_id = doc.at("pr_id").get<std::string>();
    e.notified_at = parse_rfc3339(doc.at("notified_at").get<std::string>());
    e.actors = doc.at("actors").get<std::vector<std::string>>();
    e.resolution = resolution_from_string(doc.at("resolution").get<std::string>());
    return e;
}

json read_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw CorruptStore(std::string("missing ") + what + ": " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw CorruptStore(std::string("unparsable ") + what + ": " + path.string());
    }
    return doc;
}

}  // namespace

std::string pr_key(const std::string& repo_id, const std::string& pr_id) {
    return repo_id + "/" + pr_id;
}

std::optional<PullRequestRecord> replay(const std::vector<EventRecord>& events,
                                        std::vector<IngestIssue>* issues) {
    std::optional<PullRequestRecord> pr;
    for (const EventRecord& ev : events) {
        try {
            if (!pr) {
                pr = open_pull_request(ev);
            } else {
                pr = apply_event(*pr, ev);
            }
        } catch (const Error& e) {
            if (issues) issues->push_back({-1, ev.pr_id, e.what()});
        }
    }
    return pr;
}

IngestReport ingest(RepoCorpus& corpus, std::istream& in) {
    IngestReport report;
    std::map<std::string, std::vector<EventRecord>> incoming;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ++report.lines_read;
        EventRecord ev;
        try {
            ev = parse_event(line, line_no);
        } catch (const ParseError& e) {
            report.issues.push_back({line_no, "", e.what()});
            continue;
        }
        if (!corpus.repo_id.empty() && ev.repo_id != corpus.repo_id) {
            report.issues.push_back(
                {line_no, ev.pr_id,
                 "event for repo '" + ev.repo_id + "' in corpus '" + corpus.repo_id + "'"});
            continue;
        }
        if (corpus.repo_id.empty()) corpus.repo_id = ev.repo_id;
        incoming[ev.pr_id].push_back(std::move(ev));
    }

    for (auto& [pr_id, new_events] : incoming) {
        std::vector<EventRecord>& history = corpus.events[pr_id];
        std::set<std::string> seen;
        for (const EventRecord& ev : history) seen.insert(ev.dedup_key());
        bool changed = false;
        for (EventRecord& ev : new_events) {
            if (!seen.insert(ev.dedup_key()).second) {
                ++report.events_deduplicated;
                continue;
            }
            if (!corpus.ingest_watermark || *corpus.ingest_watermark < ev.timestamp) {
                corpus.ingest_watermark = ev.timestamp;
            }
            history.push_back(std::move(ev));
            ++report.events_applied;
            changed = true;
        }
        if (!changed) continue;
        std::stable_sort(history.begin(), history.end(), event_order);
        std::vector<IngestIssue> replay_issues;
        std::optional<PullRequestRecord> pr = replay(history, &replay_issues);
        for (IngestIssue& issue : replay_issues) report.issues.push_back(std::move(issue));
        if (pr) {
            corpus.prs[pr_id] = std::move(*pr);
            report.touched_prs.insert(pr_id);
        } else {
            report.issues.push_back({-1, pr_id, "no applicable create event"});
        }
    }
    return report;
}

IngestReport ingest_file(RepoCorpus& corpus, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open event log: " + path.string());
    return ingest(corpus, in);
}

std::vector<const PullRequestRecord*> training_window(const RepoCorpus& corpus,
                                                      Instant as_of,
                                                      int window_years) {
    // A window year is 365 days.
    const auto window = std::chrono::days{365L * window_years};
    std::vector<const PullRequestRecord*> out;
    for (const auto& [id, pr] : corpus.prs) {
        if (pr.state != PrState::Merged || !pr.closed_at) continue;
        if (*pr.closed_at > as_of || *pr.closed_at < as_of - window) continue;
        const double lifetime = lifetime_hours(pr, *pr.closed_at);
        if (lifetime < kMinTrainingLifetimeHours || lifetime > kMaxTrainingLifetimeHours) {
            continue;
        }
        out.push_back(&pr);
    }
    return out;
}

std::string_view to_string(Resolution r) {
    switch (r) {
        case Resolution::Pending: return "pending";
        case Resolution::Resolved: return "resolved";
        case Resolution::WontFix: return "wontfix";
        case Resolution::NoResponse: return "noresponse";
    }
    return "?";
}

Resolution resolution_from_string(std::string_view text) {
    for (Resolution r : {Resolution::Pending, Resolution::Resolved,
                         Resolution::WontFix, Resolution::NoResponse}) {
        if (to_string(r) == text) return r;
    }
    throw ParseError("unknown resolution '" + std::string(text) + "'");
}

bool NotificationLedger::contains(const std::string& repo_id,
                                  const std::string& pr_id) const {
    return entries_.count(pr_key(repo_id, pr_id)) > 0;
}

void NotificationLedger::insert(LedgerEntry entry) {
    const std::string key = pr_key(entry.repo_id, entry.pr_id);
    if (entries_.count(key)) {
        throw Error("pr " + key + " was already notified; at most one notification per PR");
    }
    entries_.emplace(key, std::move(entry));
}

void NotificationLedger::resolve(const std::string& repo_id, const std::string& pr_id,
                                 Resolution r) {
    auto it = entries_.find(pr_key(repo_id, pr_id));
    if (it == entries_.end()) {
        throw UnknownNotification("no notification recorded for " + pr_key(repo_id, pr_id));
    }
    it->second.resolution = r;
}

const LedgerEntry* NotificationLedger::find(const std::string& repo_id,
                                            const std::string& pr_id) const {
    auto it = entries_.find(pr_key(repo_id, pr_id));
    return it == entries_.end() ? nullptr : &it->second;
}

void save_state(const EngineState& state, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::create_directories(dir / "events");
    fs::create_directories(dir / "models");

    {
        json manifest;
        manifest["format_version"] = kStoreFormatVersion;
        std::vector<std::string> repos;
        for (const auto& [repo_id, corpus] : state.corpora) repos.push_back(repo_id);
        manifest["repos"] = repos;
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump(2) << "\n";
    }
    for (const auto& [repo_id, corpus] : state.corpora) {
        std::ofstream out(dir / "events" / (repo_id + ".jsonl"));
        for (const auto& [pr_id, events] : corpus.events) {
            for (const EventRecord& ev : events) out << to_jsonl(ev) << "\n";
        }
    }
    {
        json ledger = json::array();
        for (const auto& [key, entry] : state.ledger.entries()) {
            ledger.push_back(ledger_entry_to_json(entry));
        }
        std::ofstream out(dir / "ledger.json");
        out << ledger.dump(2) << "\n";
    }
    {
        json predictions = json::object();
        for (const auto& [key, p] : state.predictions) {
            json doc;
            doc["tp_hours"] = p.tp_hours;
            doc["computed_at"] = format_rfc3339(p.computed_at);
            doc["due_at"] = format_rfc3339(p.due_at);
            predictions[key] = doc;
        }
        std::ofstream out(dir / "predictions.json");
        out << predictions.dump(2) << "\n";
    }
    for (const auto& [name, blob] : state.models) {
        std::ofstream out(dir / "models" / (name + ".json"));
        out << blob;
    }
}

EngineState load_state(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    EngineState state;

    const json manifest = read_json_file(dir / "manifest.json", "store manifest");
    if (!manifest.contains("format_version") ||
        !manifest["format_version"].is_number_integer()) {
        throw CorruptStore("manifest has no format_version: " + dir.string());
    }
    const int version = manifest["format_version"].get<int>();
    if (version != kStoreFormatVersion) {
        throw VersionMismatch("store format version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kStoreFormatVersion) + ")");
    }

    for (const json& repo : manifest.value("repos", json::array())) {
        const std::string repo_id = repo.get<std::string>();
        const fs::path path = dir / "events" / (repo_id + ".jsonl");
        std::ifstream in(path);
        if (!in) throw CorruptStore("missing event log for repo " + repo_id);
        RepoCorpus corpus;
        corpus.repo_id = repo_id;
        const IngestReport report = ingest(corpus, in);
        for (const IngestIssue& issue : report.issues) {
            if (issue.line >= 0) {
                throw CorruptStore("corrupt event log " + path.string() + " line " +
                                   std::to_string(issue.line) + ": " + issue.message);
            }
        }
        state.corpora.emplace(repo_id, std::move(corpus));
    }

    const json ledger = read_json_file(dir / "ledger.json", "ledger");
    if (!ledger.is_array()) throw CorruptStore("ledger.json is not an array");
    try {
        for (const json& doc : ledger) {
            state.ledger.insert(ledger_entry_from_json(doc));
        }
        const json predictions = read_json_file(dir / "predictions.json", "predictions");
        for (const auto& [key, doc] : predictions.items()) {
            Prediction p;
            p.tp_hours = doc.at("tp_hours").get<double>();
            p.computed_at = parse_rfc3339(doc.at("computed_at").get<std::string>());
            p.due_at = parse_rfc3339(doc.at("due_at").get<std::string>());
            state.predictions.emplace(key, p);
        }
    } catch (const json::exception& e) {
        throw CorruptStore(std::string("corrupt store field: ") + e.what());
    } catch (const ParseError& e) {
        throw CorruptStore(std::string("corrupt store field: ") + e.what());
    }

    if (fs::exists(dir / "models")) {
        for (const fs::directory_entry& entry : fs::directory_iterator(dir / "models")) {
            if (entry.path().extension() != ".json") continue;
            std::ifstream in(entry.path());
            std::ostringstream blob;
            blob << in.rdbuf();
            state.models.emplace(entry.path().stem().string(), blob.str());
        }
    }
    return state;
}

}  // namespace nudge
