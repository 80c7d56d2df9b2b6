#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/actor_identification.hpp"
#include "nudge/event_store.hpp"
#include "nudge/feature_extraction.hpp"
#include "nudge/lifetime_models.hpp"

namespace nudge {

/// LifetimeOnly nudges on predicted-lifetime overrun alone and mentions the
/// author plus every required reviewer. Full adds the activity gate and
/// actor identification.
enum class NudgeMode { LifetimeOnly, Full };

std::string_view to_string(NudgeMode mode);
NudgeMode mode_from_string(std::string_view text);

enum class DecisionOutcome {
    PredictedOnly,              ///< prediction refreshed, no gating evaluated
    SuppressedNotDue,
    SuppressedAlreadyNotified,
    SuppressedActivity,
    Notified,
};

std::string_view to_string(DecisionOutcome outcome);

/// Outcome of one scheduler pass over one PR.
struct NudgeDecision {
    std::string repo_id;
    std::string pr_id;
    Instant at{};
    DecisionOutcome outcome = DecisionOutcome::SuppressedNotDue;
    double predicted_lifetime_hours = 0.0;  ///< Tp
    Instant due_at{};                       ///< Tn = Tc + Tp + buffer
    std::optional<BlockerVerdict> verdict;  ///< present on Full-mode notifications
};

nlohmann::json to_json(const NudgeDecision& decision);

struct NotificationMessage {
    std::string repo_id;
    std::string pr_id;
    std::vector<std::string> mentioned_actors;
    std::string body;
    Instant created_at{};
};

/// When a repository has at least repo_min_training_size filtered PRs a
/// repository-specific model is preferred over the global one.
struct ModelPolicy {
    int repo_min_training_size = 1000;
    double retrain_interval_hours = 168.0;
    int window_years = 2;
};

class ModelRegistry {
  public:
    void set_global(TrainedModel model) { global_ = std::move(model); }
    void set_repo(const std::string& repo_id, TrainedModel model) {
        repo_.insert_or_assign(repo_id, std::move(model));
    }
    const TrainedModel* global_model() const { return global_ ? &*global_ : nullptr; }
    const TrainedModel* repo_model(const std::string& repo_id) const {
        auto it = repo_.find(repo_id);
        return it == repo_.end() ? nullptr : &it->second;
    }

  private:
    std::optional<TrainedModel> global_;
    std::map<std::string, TrainedModel> repo_;
};

struct EngineConfig {
    NudgeMode mode = NudgeMode::Full;
    double quiet_hours = 24.0;
    double buffer_hours = 24.0;
    double scan_interval_hours = 6.0;
    ModelPolicy policy;
    CalendarPolicy calendar;
};

/// The repository-specific model when the repo's filtered training set meets
/// the policy threshold (ties count as meeting it) and such a model exists;
/// otherwise the global model. Throws Error when no model is available.
const TrainedModel& select_model(const std::string& repo_id, const RepoCorpus& corpus,
                                 const ModelRegistry& registry, const ModelPolicy& policy,
                                 Instant as_of);

/// Tn from a creation instant and a (clamped) predicted lifetime.
Instant notification_due_at(Instant created_at, double tp_hours, double buffer_hours);

/// Recomputes the PR's prediction from a feature vector at `at` and stores
/// it. Returns a PredictedOnly decision; the ledger is never touched.
NudgeDecision on_pr_updated(const PullRequestRecord& pr, const RepoCorpus& corpus,
                            const AggregateCache& cache, const TrainedModel& model,
                            PredictionMap& predictions, const EngineConfig& config,
                            Instant at);

struct ScanResult {
    std::vector<NudgeDecision> decisions;
    std::vector<NotificationMessage> messages;
    std::vector<std::string> failures;  ///< per-PR failures; the scan continues
};

/// One batch pass over every non-terminal PR of a corpus. Per PR: refresh the
/// prediction if the PR changed since it was computed, then gate strictly in
/// the order due -> ledger -> quiet -> identify. At most one notification is
/// ever recorded per PR.
ScanResult scan(const RepoCorpus& corpus, const ModelRegistry& registry,
                NotificationLedger& ledger, PredictionMap& predictions,
                const EngineConfig& config, Instant now);

/// Marks how a recorded notification was resolved.
/// Throws UnknownNotification for PRs that were never notified.
void record_resolution(NotificationLedger& ledger, const std::string& repo_id,
                       const std::string& pr_id, Resolution resolution);

/// Resolved notifications divided by all notifications made.
double comment_resolution_percentage(const NotificationLedger& ledger);

NotificationMessage render_notification(const PullRequestRecord& pr,
                                        const std::vector<std::string>& actors,
                                        Instant now);

}  // namespace nudge
