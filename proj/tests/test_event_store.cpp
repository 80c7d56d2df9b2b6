#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nudge/errors.hpp"
#include "nudge/event_store.hpp"
#include "nudge/sim_harness.hpp"
#include "support/oracles.hpp"

using namespace nudge;
using fixtures::event;

namespace {

std::string three_event_log() {
    std::ostringstream out;
    out << to_jsonl(event("r", "pr1", EventKind::Create, "dev-1",
                          "2024-03-04T09:00:00Z", fixtures::create_payload()))
        << "\n";
    out << to_jsonl(event("r", "pr1", EventKind::Vote, "rev-1", "2024-03-04T12:00:00Z",
                          fixtures::vote_payload(10)))
        << "\n";
    out << to_jsonl(event("r", "pr1", EventKind::Merge, "dev-1", "2024-03-05T09:00:00Z"))
        << "\n";
    return out.str();
}

std::string serialize_corpus(const RepoCorpus& corpus) {
    std::ostringstream out;
    for (const auto& [pr_id, events] : corpus.events) {
        for (const EventRecord& ev : events) out << to_jsonl(ev) << "\n";
    }
    return out.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("nudge_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("empty input produces an empty delta") {
    RepoCorpus corpus;
    std::istringstream in("");
    const IngestReport report = ingest(corpus, in);
    CHECK(report.events_applied == 0);
    CHECK(corpus.prs.empty());
    CHECK_FALSE(corpus.ingest_watermark.has_value());
}

TEST_CASE("smallest complete lifecycle ingests to a merged PR") {
    RepoCorpus corpus;
    std::istringstream in(three_event_log());
    const IngestReport report = ingest(corpus, in);
    CHECK(report.events_applied == 3);
    CHECK(report.issues.empty());
    REQUIRE(corpus.prs.count("pr1") == 1);
    CHECK(corpus.prs.at("pr1").state == PrState::Merged);
    CHECK(corpus.ingest_watermark == parse_rfc3339("2024-03-05T09:00:00Z"));
}

TEST_CASE("re-ingesting the same lines is a byte-identical no-op") {
    RepoCorpus corpus;
    std::istringstream first(three_event_log());
    ingest(corpus, first);
    const std::string before = serialize_corpus(corpus);

    std::istringstream again(three_event_log());
    const IngestReport report = ingest(corpus, again);
    CHECK(report.events_applied == 0);
    CHECK(report.events_deduplicated == 3);
    CHECK(serialize_corpus(corpus) == before);
}

TEST_CASE("ingest is order-insensitive within a PR") {
    std::vector<std::string> lines;
    {
        std::istringstream in(three_event_log());
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    RepoCorpus forward, reversed;
    {
        std::istringstream in(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n");
        ingest(forward, in);
    }
    {
        std::istringstream in(lines[2] + "\n" + lines[0] + "\n" + lines[1] + "\n");
        ingest(reversed, in);
    }
    CHECK(forward == reversed);
}

TEST_CASE("malformed lines are reported with their line numbers") {
    RepoCorpus corpus;
    std::istringstream in("this is not json\n" + three_event_log() +
                          "{\"repo_id\":\"r\"}\n");
    const IngestReport report = ingest(corpus, in);
    CHECK(report.events_applied == 3);
    REQUIRE(report.issues.size() == 2);
    CHECK(report.issues[0].line == 1);
    CHECK(report.issues[1].line == 5);
}

TEST_CASE("illegal transitions surface the PR id and do not corrupt the corpus") {
    RepoCorpus corpus;
    std::ostringstream log;
    log << to_jsonl(event("r", "pr1", EventKind::Create, "dev-1",
                          "2024-03-04T09:00:00Z", fixtures::create_payload()))
        << "\n";
    log << to_jsonl(event("r", "pr1", EventKind::Merge, "dev-1", "2024-03-04T10:00:00Z"))
        << "\n";
    std::istringstream in(log.str());
    const IngestReport report = ingest(corpus, in);
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].pr_id == "pr1");
    CHECK(corpus.prs.at("pr1").state == PrState::Active);  // merge was skipped
}

TEST_CASE("equal timestamps fall back to the stable kind order") {
    RepoCorpus corpus;
    std::ostringstream log;
    // vote and comment share a timestamp; comment must replay first.
    log << to_jsonl(event("r", "pr1", EventKind::Vote, "rev-1", "2024-03-04T10:00:00Z",
                          fixtures::vote_payload(10)))
        << "\n";
    log << to_jsonl(event("r", "pr1", EventKind::Create, "dev-1",
                          "2024-03-04T10:00:00Z", fixtures::create_payload()))
        << "\n";
    log << to_jsonl(event("r", "pr1", EventKind::Comment, "rev-1",
                          "2024-03-04T10:00:00Z",
                          fixtures::comment_payload("t1", "first pass")))
        << "\n";
    std::istringstream in(log.str());
    const IngestReport report = ingest(corpus, in);
    CHECK(report.issues.empty());
    const PullRequestRecord& pr = corpus.prs.at("pr1");
    CHECK(pr.state == PrState::Approved);
    REQUIRE(pr.threads.size() == 2);
    CHECK_FALSE(pr.threads[0].is_vote_event);  // comment applied before vote
}

TEST_CASE("training window filters by state, lifetime band, and window") {
    RepoCorpus corpus;
    const auto add_merged = [&](const std::string& id, const std::string& created,
                                const std::string& closed) {
        std::ostringstream log;
        log << to_jsonl(event("r", id, EventKind::Create, "dev-1", created,
                              fixtures::create_payload()))
            << "\n";
        log << to_jsonl(event("r", id, EventKind::Vote, "rev-1", created,
                              fixtures::vote_payload(10)))
            << "\n";
        log << to_jsonl(event("r", id, EventKind::Merge, "dev-1", closed)) << "\n";
        std::istringstream in(log.str());
        ingest(corpus, in);
    };
    // Mon 2024-03-04 anchors; lifetimes below computed in business hours.
    add_merged("ok-100h", "2024-03-04T09:00:00Z", "2024-03-08T13:00:00Z");   // 100h
    add_merged("short-10h", "2024-03-04T09:00:00Z", "2024-03-04T19:00:00Z"); // 10h
    add_merged("long-400h", "2024-02-01T00:00:00Z", "2024-02-25T00:00:00Z"); // ~412h
    add_merged("stale", "2021-01-04T09:00:00Z", "2021-01-08T13:00:00Z");     // 3y ago
    {
        std::ostringstream log;
        log << to_jsonl(event("r", "dropped", EventKind::Create, "dev-1",
                              "2024-03-04T09:00:00Z", fixtures::create_payload()))
            << "\n";
        log << to_jsonl(event("r", "dropped", EventKind::Abandon, "dev-1",
                              "2024-03-08T13:00:00Z"))
            << "\n";
        std::istringstream in(log.str());
        ingest(corpus, in);
    }

    const auto window = training_window(corpus, parse_rfc3339("2024-06-01T00:00:00Z"));
    REQUIRE(window.size() == 1);
    CHECK(window[0]->id == "ok-100h");

    SUBCASE("exact band edges are inclusive") {
        add_merged("exact-24h", "2024-03-04T09:00:00Z", "2024-03-05T09:00:00Z");
        // Mon 00:00 plus 336 business hours lands on Fri 2024-03-22 00:00.
        add_merged("exact-336h", "2024-03-04T00:00:00Z", "2024-03-22T00:00:00Z");
        const auto edges = training_window(corpus, parse_rfc3339("2024-06-01T00:00:00Z"));
        CHECK(edges.size() == 3);
    }
}

TEST_CASE("ledger accepts at most one notification per PR") {
    NotificationLedger ledger;
    ledger.insert({"r", "pr1", parse_rfc3339("2024-03-04T09:00:00Z"), {"dev-1"},
                   Resolution::Pending});
    CHECK_THROWS_AS(ledger.insert({"r", "pr1", parse_rfc3339("2024-03-05T09:00:00Z"),
                                   {"dev-1"}, Resolution::Pending}),
                    Error);
    ledger.resolve("r", "pr1", Resolution::Resolved);
    CHECK(ledger.find("r", "pr1")->resolution == Resolution::Resolved);
    CHECK_THROWS_AS(ledger.resolve("r", "nope", Resolution::Resolved),
                    UnknownNotification);
}

TEST_CASE("store round-trip of empty state") {
    const auto dir = temp_dir("empty_state");
    EngineState state;
    save_state(state, dir);
    CHECK(load_state(dir) == state);
    std::filesystem::remove_all(dir);
}

TEST_CASE("store round-trip of a 100-PR synthetic corpus compares equal") {
    sim::SimConfig config;
    config.seed = 11;
    config.n_prs = 100;
    config.n_training_prs = 0;
    const auto events = sim::generate_corpus(config);

    EngineState state;
    for (const auto& [repo_id, repo_events] : events) {
        RepoCorpus& corpus = state.corpora[repo_id];
        corpus.repo_id = repo_id;
        for (const EventRecord& ev : repo_events) sim::append_event(corpus, ev);
    }
    state.ledger.insert({"repo-0", "pr-0-1", parse_rfc3339("2024-03-10T00:00:00Z"),
                         {"dev-1", "rev-2"}, Resolution::Resolved});
    state.predictions["repo-0/pr-0-1"] =
        Prediction{101.25, parse_rfc3339("2024-03-05T00:00:00Z"),
                   parse_rfc3339("2024-03-09T05:15:00Z")};
    state.models["global"] = "{\"format_version\":1}";

    const auto dir = temp_dir("roundtrip_100");
    save_state(state, dir);
    const EngineState loaded = load_state(dir);
    CHECK(loaded == state);
    std::filesystem::remove_all(dir);
}

TEST_CASE("loading a truncated store reports corruption") {
    const auto dir = temp_dir("truncated");
    EngineState state;
    RepoCorpus& corpus = state.corpora["r"];
    std::istringstream in(three_event_log());
    ingest(corpus, in);
    save_state(state, dir);

    SUBCASE("truncated manifest") {
        std::ofstream(dir / "manifest.json", std::ios::trunc) << "{\"format_ver";
        CHECK_THROWS_AS(load_state(dir), CorruptStore);
    }
    SUBCASE("unsupported version") {
        std::ofstream(dir / "manifest.json", std::ios::trunc)
            << "{\"format_version\": 99, \"repos\": []}";
        CHECK_THROWS_AS(load_state(dir), VersionMismatch);
    }
    SUBCASE("truncated event log") {
        std::ofstream(dir / "events" / "r.jsonl", std::ios::trunc)
            << "{\"repo_id\":\"r\",\"pr_id\":\"x\"";
        CHECK_THROWS_AS(load_state(dir), CorruptStore);
    }
    SUBCASE("missing ledger") {
        std::filesystem::remove(dir / "ledger.json");
        CHECK_THROWS_AS(load_state(dir), CorruptStore);
    }
    std::filesystem::remove_all(dir);
}
