#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/event_store.hpp"
#include "nudge/lifetime_models.hpp"
#include "nudge/nudge_engine.hpp"

namespace nudge::sim {

/// Behavioral parameters of a simulated developer. Response delays are
/// log-normal in business hours; a nudge multiplies the actor's remaining
/// delay on the PR by nudge_response_factor.
struct AgentProfile {
    double mean_response_hours = 20.0;  ///< mean of the log-normal, hours
    double sigma_log = 1.0;             ///< sigma of the underlying normal
    double nudge_response_factor = 0.3; ///< in (0, 1]; 1.0 = nudges ignored
    bool weekend_inactive = true;
};

enum class TrialArm { None, NudgeLT, NudgeFULL };

std::string_view to_string(TrialArm arm);

struct SimConfig {
    std::uint64_t seed = 1;
    int n_repos = 1;
    int n_prs = 1000;          ///< live PRs in the trial
    int n_training_prs = 1200; ///< historical tranche used to train
    double horizon_days = 120.0;
    double spawn_span_days = 30.0;
    double scan_interval_hours = 6.0;
    double quiet_hours = 24.0;
    double buffer_hours = 24.0;
    double p_none = 1.0 / 3.0;
    double p_lt = 1.0 / 3.0;
    double p_full = 1.0 / 3.0;
    AgentProfile authors;
    AgentProfile reviewers;
    /// Mean of the sampled per-PR lifetime (business hours); samples are
    /// clipped to [min_lifetime_hours, max_lifetime_hours].
    double target_mean_lifetime_hours = 110.0;
    double lifetime_sigma_log = 1.0;
    double min_lifetime_hours = 1.0;
    double max_lifetime_hours = 500.0;
    int max_review_rounds = 3;
    int author_pool = 40;
    int reviewer_pool = 24;
    double p_abandon = 0.05;
    double p_bot_comment = 0.15;
    ModelBackend backend = ModelBackend::GradientBoosting;
    std::string trial_start = "2024-03-04T08:00:00Z";
};

/// Parses a flat TOML file ([section] headers, key = value lines). Unknown
/// keys are rejected. Throws ConfigInvalid / ParseError.
SimConfig load_sim_config(const std::filesystem::path& path);

/// Throws ConfigInvalid when probabilities do not sum to 1, a response
/// factor leaves (0, 1], or a size/duration is not positive.
void validate(const SimConfig& config);

/// Deterministic arm assignment from the PR id hash and the seed only.
TrialArm assign_arm(std::string_view pr_id, std::uint64_t seed, double p_none,
                    double p_lt);

/// Generates seeded synthetic event streams, one list per repository, with
/// complete lifecycles (create, reviews, updates, merge or abandon) and
/// business-hour lifetimes spanning the configured clip range. Byte-identical
/// for a fixed config.
std::map<std::string, std::vector<EventRecord>> generate_corpus(const SimConfig& config);

/// Writes one <repo_id>.jsonl per repository into `dir`.
void write_event_logs(const std::map<std::string, std::vector<EventRecord>>& events,
                      const std::filesystem::path& dir);

/// Appends one event to a corpus, applying it incrementally. Events must
/// arrive in (timestamp, tie-break) order per PR. Throws on illegal input.
void append_event(RepoCorpus& corpus, const EventRecord& ev);

struct ArmStats {
    double avg_lifetime_hours = 0.0;
    int pr_count = 0;       ///< completed PRs inside the horizon
    int censored = 0;       ///< still open at the horizon, excluded
};

struct CompletionBuckets {
    int within_one_day = 0;
    int within_three_days = 0;
    int within_one_week = 0;
    int over_one_week = 0;

    int total() const {
        return within_one_day + within_three_days + within_one_week + over_one_week;
    }
};

struct ResolutionStats {
    int positive = 0;  ///< resolved
    int negative = 0;  ///< wontfix
    int none = 0;      ///< no response (or still pending)
    double positive_rate = 0.0;  ///< positive / total notified
};

struct TrialReport {
    std::map<TrialArm, ArmStats> arms;
    std::map<TrialArm, CompletionBuckets> buckets;       ///< nudge arms only
    std::map<TrialArm, ResolutionStats> resolutions;     ///< nudge arms only
    double reduction_lt_pct = 0.0;    ///< vs the None arm
    double reduction_full_pct = 0.0;
    std::map<TrialArm, std::vector<double>> lifetimes;   ///< per-arm samples
    int notified_lt = 0;
    int notified_full = 0;
};

/// Percentage reduction of `arm_avg` against the control average.
double reduction_pct(double none_avg, double arm_avg);

/// Runs the randomized None / Nudge-LT / Nudge-FULL trial: trains a model on
/// a generated historical tranche, replays the live PRs event by event with
/// engine scans every scan_interval, applies the behavioral response to
/// notifications, and aggregates at the horizon (open PRs are censored).
TrialReport run_trial(const SimConfig& config);

/// Buckets closed_at - notified_at for every notified PR of the ledger that
/// is closed in the corpus. Days are 24 raw hours.
CompletionBuckets bucket_completions(const NotificationLedger& ledger,
                                     const RepoCorpus& corpus);

ResolutionStats resolution_stats(const NotificationLedger& ledger);

/// Writes report.txt and report.csv (and buckets.svg when `svg` is set)
/// into `dir`. Output is byte-deterministic for a fixed report.
void emit_report(const TrialReport& report, const std::filesystem::path& dir,
                 bool svg = false);

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_p_value(std::vector<double> a, std::vector<double> b);

}  // namespace nudge::sim
