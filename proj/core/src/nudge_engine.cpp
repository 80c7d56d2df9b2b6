#include "nudge/nudge_engine.hpp"

#include <cmath>

#include "nudge/activity_detection.hpp"
#include "nudge/errors.hpp"

namespace nudge {
namespace {

Prediction compute_prediction(const PullRequestRecord& pr, const RepoCorpus& corpus,
                              const AggregateCache& cache, const TrainedModel& model,
                              const EngineConfig& config, Instant at) {
    const FeatureVector fv = extract(pr, corpus, cache, at, config.calendar);
    Prediction p;
    p.tp_hours = model.predict(fv);
    p.computed_at = at;
    p.due_at = notification_due_at(pr.created_at, p.tp_hours, config.buffer_hours);
    return p;
}

std::vector<std::string> generic_recipients(const PullRequestRecord& pr) {
    std::vector<std::string> actors;
    actors.push_back(pr.author.id);
    for (const Actor& r : pr.required_reviewers) actors.push_back(r.id);
    return actors;
}

}  // namespace

std::string_view to_string(NudgeMode mode) {
    return mode == NudgeMode::LifetimeOnly ? "lt" : "full";
}

NudgeMode mode_from_string(std::string_view text) {
    if (text == "lt") return NudgeMode::LifetimeOnly;
    if (text == "full") return NudgeMode::Full;
    throw ParseError("unknown nudge mode '" + std::string(text) + "' (expected lt|full)");
}

std::string_view to_string(DecisionOutcome outcome) {
    switch (outcome) {
        case DecisionOutcome::PredictedOnly: return "predicted_only";
        case DecisionOutcome::SuppressedNotDue: return "suppressed_not_due";
        case DecisionOutcome::SuppressedAlreadyNotified: return "suppressed_already_notified";
        case DecisionOutcome::SuppressedActivity: return "suppressed_activity";
        case DecisionOutcome::Notified: return "notified";
    }
    return "?";
}

nlohmann::json to_json(const NudgeDecision& decision) {
    nlohmann::json doc;
    doc["repo_id"] = decision.repo_id;
    doc["pr_id"] = decision.pr_id;
    doc["at"] = format_rfc3339(decision.at);
    doc["outcome"] = std::string(to_string(decision.outcome));
    doc["predicted_lifetime_hours"] = decision.predicted_lifetime_hours;
    doc["due_at"] = format_rfc3339(decision.due_at);
    if (decision.verdict) {
        nlohmann::json v;
        v["blocker_class"] = std::string(to_string(decision.verdict->blocker_class));
        v["waiting_on"] =
            decision.verdict->waiting_on == WaitingOn::Author ? "author" : "reviewers";
        v["actors"] = decision.verdict->actors;
        doc["verdict"] = v;
    }
    return doc;
}

const TrainedModel& select_model(const std::string& repo_id, const RepoCorpus& corpus,
                                 const ModelRegistry& registry, const ModelPolicy& policy,
                                 Instant as_of) {
    const std::size_t available =
        training_window(corpus, as_of, policy.window_years).size();
    if (available >= std::size_t(policy.repo_min_training_size)) {
        if (const TrainedModel* repo = registry.repo_model(repo_id)) return *repo;
    }
    if (const TrainedModel* global = registry.global_model()) return *global;
    throw Error("no model available for repo " + repo_id);
}

Instant notification_due_at(Instant created_at, double tp_hours, double buffer_hours) {
    const auto offset =
        std::chrono::seconds{std::llround((tp_hours + buffer_hours) * 3600.0)};
    return created_at + offset;
}

NudgeDecision on_pr_updated(const PullRequestRecord& pr, const RepoCorpus& corpus,
                            const AggregateCache& cache, const TrainedModel& model,
                            PredictionMap& predictions, const EngineConfig& config,
                            Instant at) {
    const Prediction p = compute_prediction(pr, corpus, cache, model, config, at);
    predictions[pr_key(pr.repo_id, pr.id)] = p;

    NudgeDecision decision;
    decision.repo_id = pr.repo_id;
    decision.pr_id = pr.id;
    decision.at = at;
    decision.outcome = DecisionOutcome::PredictedOnly;
    decision.predicted_lifetime_hours = p.tp_hours;
    decision.due_at = p.due_at;
    return decision;
}

ScanResult scan(const RepoCorpus& corpus, const ModelRegistry& registry,
                NotificationLedger& ledger, PredictionMap& predictions,
                const EngineConfig& config, Instant now) {
    ScanResult result;
    const AggregateCache cache = refresh_cache(corpus, now, config.policy.window_years);

    for (const auto& [pr_id, pr] : corpus.prs) {
        if (is_terminal(pr.state)) continue;
        if (pr.created_at > now) continue;
        try {
            const TrainedModel& model =
                select_model(corpus.repo_id, corpus, registry, config.policy, now);

            const std::string key = pr_key(pr.repo_id, pr.id);
            auto found = predictions.find(key);
            if (found == predictions.end() || found->second.computed_at < pr.last_event_at) {
                Prediction fresh = compute_prediction(pr, corpus, cache, model, config, now);
                found = predictions.insert_or_assign(key, fresh).first;
            }
            const Prediction& p = found->second;

            NudgeDecision decision;
            decision.repo_id = pr.repo_id;
            decision.pr_id = pr.id;
            decision.at = now;
            decision.predicted_lifetime_hours = p.tp_hours;
            decision.due_at = p.due_at;

            if (now < p.due_at) {
                decision.outcome = DecisionOutcome::SuppressedNotDue;
            } else if (ledger.contains(pr.repo_id, pr.id)) {
                decision.outcome = DecisionOutcome::SuppressedAlreadyNotified;
            } else if (config.mode == NudgeMode::Full &&
                       !is_quiet(pr, now, config.quiet_hours)) {
                decision.outcome = DecisionOutcome::SuppressedActivity;
            } else {
                decision.outcome = DecisionOutcome::Notified;
                std::vector<std::string> actors;
                if (config.mode == NudgeMode::Full) {
                    decision.verdict = identify(pr);
                    actors = decision.verdict->actors;
                } else {
                    actors = generic_recipients(pr);
                }
                ledger.insert(LedgerEntry{pr.repo_id, pr.id, now, actors,
                                          Resolution::Pending});
                result.messages.push_back(render_notification(pr, actors, now));
            }
            result.decisions.push_back(std::move(decision));
        } catch (const Error& e) {
            result.failures.push_back("pr " + pr_id + ": " + e.what());
        }
    }
    return result;
}

void record_resolution(NotificationLedger& ledger, const std::string& repo_id,
                       const std::string& pr_id, Resolution resolution) {
    ledger.resolve(repo_id, pr_id, resolution);
}

double comment_resolution_percentage(const NotificationLedger& ledger) {
    if (ledger.size() == 0) return 0.0;
    int resolved = 0;
    for (const auto& [key, entry] : ledger.entries()) {
        if (entry.resolution == Resolution::Resolved) ++resolved;
    }
    return double(resolved) / double(ledger.size());
}

NotificationMessage render_notification(const PullRequestRecord& pr,
                                        const std::vector<std::string>& actors,
                                        Instant now) {
    NotificationMessage msg;
    msg.repo_id = pr.repo_id;
    msg.pr_id = pr.id;
    msg.mentioned_actors = actors;
    msg.created_at = now;

    const long days = (now - pr.created_at).count() / 86400;
    std::string mentions;
    for (const std::string& actor : actors) {
        mentions += "@" + pr.display_name_of(actor) + " ";
    }
    msg.body = mentions + "This pull request has been open for " +
               std::to_string(days) + (days == 1 ? " day" : " days") +
               ". Please take appropriate action.";
    return msg;
}

}  // namespace nudge
