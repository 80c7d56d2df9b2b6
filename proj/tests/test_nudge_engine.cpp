#include <doctest.h>

#include <sstream>

#include "nudge/errors.hpp"
#include "nudge/nudge_engine.hpp"
#include "nudge/sim_harness.hpp"
#include "support/oracles.hpp"

using namespace nudge;
using fixtures::event;

namespace {

// A registry with one constant-mean global model predicting ~100 hours.
ModelRegistry constant_registry(double hours = 100.0) {
    std::vector<std::vector<double>> X(12, std::vector<double>(kRetainedFeatureCount, 0.0));
    std::vector<double> y(12, hours);
    TrainedModel model = fit_values(ModelBackend::ConstantMean, X, y);
    model.feature_schema = retained_feature_names();
    ModelRegistry registry;
    registry.set_global(std::move(model));
    return registry;
}

RepoCorpus corpus_with(const std::vector<EventRecord>& events) {
    RepoCorpus corpus;
    std::ostringstream log;
    for (const EventRecord& ev : events) log << to_jsonl(ev) << "\n";
    std::istringstream in(log.str());
    const IngestReport report = ingest(corpus, in);
    REQUIRE(report.issues.empty());
    return corpus;
}

RepoCorpus one_open_pr(const std::string& created = "2024-03-04T09:00:00Z") {
    return corpus_with({event("r", "pr1", EventKind::Create, "dev-1", created,
                              fixtures::create_payload({"rev-1", "rev-2"}))});
}

const NudgeDecision& only_decision(const ScanResult& result) {
    REQUIRE(result.decisions.size() == 1);
    return result.decisions[0];
}

}  // namespace

TEST_CASE("Tn is exactly Tc plus Tp plus the buffer") {
    const Instant tc = parse_rfc3339("2024-03-04T09:00:00Z");
    CHECK(notification_due_at(tc, 100.0, 24.0) == tc + std::chrono::hours{124});
    CHECK(notification_due_at(tc, 30.5, 24.0) ==
          tc + std::chrono::seconds{std::llround(54.5 * 3600)});
}

TEST_CASE("a young PR is suppressed as not due") {
    // Age 30h, Tp = 100h: 30 < 124.
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry = constant_registry(100.0);
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    const Instant now = parse_rfc3339("2024-03-05T15:00:00Z");
    const ScanResult result = scan(corpus, registry, ledger, predictions, config, now);
    const NudgeDecision& decision = only_decision(result);
    CHECK(decision.outcome == DecisionOutcome::SuppressedNotDue);
    CHECK(decision.predicted_lifetime_hours == doctest::Approx(100.0));
    CHECK(decision.due_at == corpus.prs.at("pr1").created_at + std::chrono::hours{124});
    CHECK(ledger.size() == 0);
}

TEST_CASE("an overdue quiet PR is notified once with the flowchart verdict") {
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry = constant_registry(100.0);
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    // Way past Tc + 124h, and the PR never saw activity.
    const Instant now = parse_rfc3339("2024-03-12T09:00:00Z");
    const ScanResult first = scan(corpus, registry, ledger, predictions, config, now);
    const NudgeDecision& decision = only_decision(first);
    CHECK(decision.outcome == DecisionOutcome::Notified);
    REQUIRE(decision.verdict.has_value());
    CHECK(decision.verdict->blocker_class == BlockerClass::ReviewNotStarted);
    CHECK(decision.verdict->actors == std::vector<std::string>{"rev-1", "rev-2"});
    REQUIRE(first.messages.size() == 1);
    CHECK(first.messages[0].mentioned_actors == decision.verdict->actors);
    CHECK(first.messages[0].body ==
          "@rev-1 @rev-2 This pull request has been open for 8 days. "
          "Please take appropriate action.");
    REQUIRE(ledger.contains("r", "pr1"));
    CHECK(ledger.find("r", "pr1")->resolution == Resolution::Pending);

    // The second scan never re-notifies.
    const ScanResult second =
        scan(corpus, registry, ledger, predictions, config, now + std::chrono::hours{6});
    CHECK(only_decision(second).outcome == DecisionOutcome::SuppressedAlreadyNotified);
    CHECK(ledger.size() == 1);
}

TEST_CASE("recent activity suppresses an overdue notification in full mode") {
    RepoCorpus corpus = one_open_pr();
    const Instant now = parse_rfc3339("2024-03-12T09:00:00Z");
    // A human comment two hours before the scan.
    {
        RepoCorpus updated = corpus_with(
            {event("r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
                   fixtures::create_payload({"rev-1", "rev-2"})),
             event("r", "pr1", EventKind::Comment, "rev-1", "2024-03-12T07:00:00Z",
                   fixtures::comment_payload("t1", "on it"), "Rev One")});
        corpus = updated;
    }
    const ModelRegistry registry = constant_registry(100.0);
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    const ScanResult result = scan(corpus, registry, ledger, predictions, config, now);
    CHECK(only_decision(result).outcome == DecisionOutcome::SuppressedActivity);
    CHECK(ledger.size() == 0);

    // LifetimeOnly mode skips the activity gate and notifies generically.
    EngineConfig lt = config;
    lt.mode = NudgeMode::LifetimeOnly;
    NotificationLedger lt_ledger;
    PredictionMap lt_predictions;
    const ScanResult lt_result = scan(corpus, registry, lt_ledger, lt_predictions, lt, now);
    const NudgeDecision& lt_decision = only_decision(lt_result);
    CHECK(lt_decision.outcome == DecisionOutcome::Notified);
    CHECK_FALSE(lt_decision.verdict.has_value());
    REQUIRE(lt_result.messages.size() == 1);
    CHECK(lt_result.messages[0].mentioned_actors ==
          std::vector<std::string>{"dev-1", "rev-1", "rev-2"});
}

TEST_CASE("gate order is due, ledger, quiet") {
    // Overdue PR with recent activity AND a ledger entry: the ledger wins.
    RepoCorpus corpus = corpus_with(
        {event("r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
               fixtures::create_payload()),
         event("r", "pr1", EventKind::Comment, "rev-1", "2024-03-12T07:00:00Z",
               fixtures::comment_payload("t1", "busy"), "Rev One")});
    const ModelRegistry registry = constant_registry(100.0);
    NotificationLedger ledger;
    ledger.insert({"r", "pr1", parse_rfc3339("2024-03-11T09:00:00Z"), {"dev-1"},
                   Resolution::Pending});
    PredictionMap predictions;
    EngineConfig config;
    const ScanResult result = scan(corpus, registry, ledger, predictions, config,
                                   parse_rfc3339("2024-03-12T09:00:00Z"));
    CHECK(only_decision(result).outcome == DecisionOutcome::SuppressedAlreadyNotified);
}

TEST_CASE("terminal PRs are not scanned") {
    RepoCorpus corpus = corpus_with(
        {event("r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
               fixtures::create_payload()),
         event("r", "pr1", EventKind::Vote, "rev-1", "2024-03-04T10:00:00Z",
               fixtures::vote_payload(10)),
         event("r", "pr1", EventKind::Merge, "dev-1", "2024-03-04T11:00:00Z")});
    const ModelRegistry registry = constant_registry();
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    const ScanResult result = scan(corpus, registry, ledger, predictions, config,
                                   parse_rfc3339("2024-03-20T00:00:00Z"));
    CHECK(result.decisions.empty());
}

TEST_CASE("scan is idempotent at a fixed instant") {
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry = constant_registry(100.0);
    EngineConfig config;
    const Instant now = parse_rfc3339("2024-03-12T09:00:00Z");

    NotificationLedger ledger_a;
    PredictionMap predictions_a;
    const ScanResult a = scan(corpus, registry, ledger_a, predictions_a, config, now);
    NotificationLedger ledger_b;
    PredictionMap predictions_b;
    const ScanResult b = scan(corpus, registry, ledger_b, predictions_b, config, now);
    REQUIRE(a.decisions.size() == b.decisions.size());
    CHECK(a.decisions[0].outcome == b.decisions[0].outcome);
    CHECK(a.decisions[0].predicted_lifetime_hours ==
          b.decisions[0].predicted_lifetime_hours);
    CHECK(predictions_a == predictions_b);
}

TEST_CASE("scan continues past per-PR failures") {
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry;  // no model at all
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    const ScanResult result = scan(corpus, registry, ledger, predictions, config,
                                   parse_rfc3339("2024-03-12T09:00:00Z"));
    CHECK(result.decisions.empty());
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].find("no model") != std::string::npos);
}

TEST_CASE("on_pr_updated refreshes the prediction and leaves the ledger alone") {
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry = constant_registry(100.0);
    EngineConfig config;
    NotificationLedger ledger;
    PredictionMap predictions;

    const Instant first_scan = parse_rfc3339("2024-03-05T09:00:00Z");
    scan(corpus, registry, ledger, predictions, config, first_scan);
    const Prediction before = predictions.at("r/pr1");

    // An update arrives; re-inference replaces Tp and Tn.
    corpus = corpus_with(
        {event("r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
               fixtures::create_payload({"rev-1", "rev-2"})),
         event("r", "pr1", EventKind::UpdateIteration, "dev-1", "2024-03-06T10:00:00Z",
               fixtures::churn_payload())});
    const PullRequestRecord& pr = corpus.prs.at("pr1");
    const Instant update_at = parse_rfc3339("2024-03-06T10:00:00Z");
    const AggregateCache cache = refresh_cache(corpus, update_at);
    const TrainedModel& model =
        select_model("r", corpus, registry, config.policy, update_at);
    const NudgeDecision decision =
        on_pr_updated(pr, corpus, cache, model, predictions, config, update_at);
    CHECK(decision.outcome == DecisionOutcome::PredictedOnly);
    const Prediction after = predictions.at("r/pr1");
    CHECK(after.computed_at == update_at);
    CHECK(after.computed_at != before.computed_at);
    CHECK(ledger.size() == 0);

    // The stored prediction equals a direct predict() on the fresh vector.
    const FeatureVector fv = extract(pr, corpus, cache, update_at);
    CHECK(after.tp_hours == model.predict(fv));

    // A later scan reuses the refreshed prediction rather than recomputing.
    const ScanResult result = scan(corpus, registry, ledger, predictions, config,
                                   parse_rfc3339("2024-03-06T12:00:00Z"));
    CHECK(only_decision(result).predicted_lifetime_hours == after.tp_hours);
}

TEST_CASE("notified PRs are never re-notified after updates") {
    RepoCorpus corpus = one_open_pr();
    const ModelRegistry registry = constant_registry(100.0);
    NotificationLedger ledger;
    PredictionMap predictions;
    EngineConfig config;
    const Instant now = parse_rfc3339("2024-03-12T09:00:00Z");
    scan(corpus, registry, ledger, predictions, config, now);
    REQUIRE(ledger.size() == 1);

    corpus = corpus_with(
        {event("r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
               fixtures::create_payload({"rev-1", "rev-2"})),
         event("r", "pr1", EventKind::UpdateIteration, "dev-1", "2024-03-13T10:00:00Z",
               fixtures::churn_payload())});
    const ScanResult later = scan(corpus, registry, ledger, predictions, config,
                                  parse_rfc3339("2024-03-15T09:00:00Z"));
    CHECK(only_decision(later).outcome == DecisionOutcome::SuppressedAlreadyNotified);
    CHECK(ledger.size() == 1);
}

TEST_CASE("model scope selection by training-set size") {
    sim::SimConfig sim_config;
    sim_config.seed = 4;
    sim_config.n_prs = 60;
    sim_config.n_training_prs = 0;
    sim_config.p_abandon = 0.0;
    const auto events = sim::generate_corpus(sim_config);
    RepoCorpus corpus;
    for (const auto& [repo_id, repo_events] : events) {
        for (const EventRecord& ev : repo_events) sim::append_event(corpus, ev);
    }
    const Instant as_of = parse_rfc3339("2025-01-01T00:00:00Z");
    const int usable = int(training_window(corpus, as_of).size());
    REQUIRE(usable > 0);

    ModelRegistry registry = constant_registry(90.0);
    TrainedModel repo_model = *registry.global_model();
    repo_model.scope_repo = corpus.repo_id;
    registry.set_repo(corpus.repo_id, repo_model);

    ModelPolicy policy;
    SUBCASE("below the threshold the global model is used") {
        policy.repo_min_training_size = usable + 1;
        const TrainedModel& chosen =
            select_model(corpus.repo_id, corpus, registry, policy, as_of);
        CHECK_FALSE(chosen.scope_repo.has_value());
    }
    SUBCASE("exactly at the threshold the repo model is used") {
        policy.repo_min_training_size = usable;
        const TrainedModel& chosen =
            select_model(corpus.repo_id, corpus, registry, policy, as_of);
        REQUIRE(chosen.scope_repo.has_value());
        CHECK(*chosen.scope_repo == corpus.repo_id);
    }
    SUBCASE("a qualifying repo without its own model falls back to global") {
        ModelRegistry global_only = constant_registry(90.0);
        policy.repo_min_training_size = usable;
        const TrainedModel& chosen =
            select_model(corpus.repo_id, corpus, global_only, policy, as_of);
        CHECK_FALSE(chosen.scope_repo.has_value());
    }
}

TEST_CASE("record_resolution updates existing entries only") {
    NotificationLedger ledger;
    ledger.insert({"r", "pr1", parse_rfc3339("2024-03-10T00:00:00Z"), {"dev-1"},
                   Resolution::Pending});
    record_resolution(ledger, "r", "pr1", Resolution::WontFix);
    CHECK(ledger.find("r", "pr1")->resolution == Resolution::WontFix);
    CHECK_THROWS_AS(record_resolution(ledger, "r", "missing", Resolution::Resolved),
                    UnknownNotification);
}

TEST_CASE("comment resolution percentage over a mixed ledger") {
    NotificationLedger ledger;
    const Instant t = parse_rfc3339("2024-03-10T00:00:00Z");
    ledger.insert({"r", "a", t, {"x"}, Resolution::Resolved});
    ledger.insert({"r", "b", t, {"x"}, Resolution::Resolved});
    ledger.insert({"r", "c", t, {"x"}, Resolution::Resolved});
    ledger.insert({"r", "d", t, {"x"}, Resolution::WontFix});
    CHECK(comment_resolution_percentage(ledger) == doctest::Approx(0.75));
}

TEST_CASE("decision audit records serialize to one JSON object per decision") {
    NudgeDecision decision;
    decision.repo_id = "r";
    decision.pr_id = "pr1";
    decision.at = parse_rfc3339("2024-03-12T09:00:00Z");
    decision.outcome = DecisionOutcome::Notified;
    decision.predicted_lifetime_hours = 101.5;
    decision.due_at = parse_rfc3339("2024-03-08T13:00:00Z");
    decision.verdict = BlockerVerdict{BlockerClass::ApprovedNotMerged,
                                      WaitingOn::Author, {"dev-1"}};
    const nlohmann::json doc = to_json(decision);
    CHECK(doc["outcome"] == "notified");
    CHECK(doc["verdict"]["actors"][0] == "dev-1");
    CHECK(doc["predicted_lifetime_hours"] == 101.5);
}
