#include <algorithm>
#include <cmath>
#include <queue>

#include "nudge/activity_detection.hpp"
#include "nudge/errors.hpp"
#include "sim_script.hpp"

namespace nudge::sim {
namespace {

using detail::PrScript;
using detail::Sampler;

constexpr std::uint64_t kHistoricalSalt = 1;
constexpr std::uint64_t kLiveSalt = 2;
constexpr std::uint64_t kResponseSalt = 3;

struct LivePr {
    const PrScript* script = nullptr;
    TrialArm arm = TrialArm::None;
    std::size_t next_step = 0;
    Instant cursor{};         ///< when the previous step fired
    Instant pending_due{};
    Instant last_event_at{};
    std::uint64_t generation = 0;
    std::map<std::string, double> actor_factor;
    bool spawned = false;
    bool closed = false;
};

struct QueueItem {
    Instant time{};
    int kind = 0;  ///< 0 = spawn, 1 = step, 2 = scan tick; ties run in this order
    std::size_t pr_index = 0;
    std::uint64_t generation = 0;

    bool operator>(const QueueItem& other) const {
        if (time != other.time) return time > other.time;
        if (kind != other.kind) return kind > other.kind;
        return pr_index > other.pr_index;
    }
};

struct ArmState {
    NotificationLedger ledger;
    PredictionMap predictions;
    std::map<std::string, RepoCorpus> corpora;
};

double hours_between(Instant a, Instant b, bool business) {
    if (b <= a) return 0.0;
    if (business) return business_hours_between(a, b);
    return double((b - a).count()) / 3600.0;
}

Instant advance(Instant from, double hours, bool business) {
    if (business) return advance_business_hours(from, hours);
    return from + std::chrono::seconds{std::llround(hours * 3600.0)};
}

/// Assembles the training matrix from a historical corpus, extracting each
/// PR at one second past creation with a point-in-time cache.
void assemble_training_set(const RepoCorpus& corpus, Instant as_of,
                           std::vector<FeatureVector>& X, std::vector<double>& y) {
    for (const PullRequestRecord* pr : training_window(corpus, as_of)) {
        const Instant at = pr->created_at + std::chrono::seconds{1};
        const AggregateCache cache = refresh_cache(corpus, at);
        X.push_back(extract(*pr, corpus, cache, at));
        y.push_back(lifetime_hours(*pr, *pr->closed_at));
    }
}

}  // namespace

double reduction_pct(double none_avg, double arm_avg) {
    return (none_avg - arm_avg) / none_avg * 100.0;
}

CompletionBuckets bucket_completions(const NotificationLedger& ledger,
                                     const RepoCorpus& corpus) {
    CompletionBuckets buckets;
    for (const auto& [key, entry] : ledger.entries()) {
        if (entry.repo_id != corpus.repo_id) continue;
        auto it = corpus.prs.find(entry.pr_id);
        if (it == corpus.prs.end() || !it->second.closed_at) continue;
        const double hours =
            double((*it->second.closed_at - entry.notified_at).count()) / 3600.0;
        if (hours <= 24.0) {
            ++buckets.within_one_day;
        } else if (hours <= 72.0) {
            ++buckets.within_three_days;
        } else if (hours <= 168.0) {
            ++buckets.within_one_week;
        } else {
            ++buckets.over_one_week;
        }
    }
    return buckets;
}

ResolutionStats resolution_stats(const NotificationLedger& ledger) {
    ResolutionStats stats;
    for (const auto& [key, entry] : ledger.entries()) {
        switch (entry.resolution) {
            case Resolution::Resolved: ++stats.positive; break;
            case Resolution::WontFix: ++stats.negative; break;
            case Resolution::Pending:
            case Resolution::NoResponse: ++stats.none; break;
        }
    }
    const int total = stats.positive + stats.negative + stats.none;
    stats.positive_rate = total > 0 ? double(stats.positive) / double(total) : 0.0;
    return stats;
}

double ks_p_value(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 1.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        const double fa = double(i) / double(a.size());
        const double fb = double(j) / double(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    const double n = double(a.size()) * double(b.size()) / double(a.size() + b.size());
    const double root_n = std::sqrt(n);
    const double lambda = (root_n + 0.12 + 0.11 / root_n) * d;
    if (lambda < 1e-3) return 1.0;  // the tail sum does not converge at zero
    // Asymptotic Kolmogorov tail sum.
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

TrialReport run_trial(const SimConfig& config) {
    validate(config);
    const Instant trial_start = parse_rfc3339(config.trial_start);
    const Instant horizon_end =
        trial_start + std::chrono::seconds{std::llround(config.horizon_days * 86400.0)};

    // Historical tranche: completed well before the trial starts, used both
    // to train the model and as feature history inside each arm's corpus.
    const Instant history_start = trial_start - std::chrono::days{200};
    const std::vector<PrScript> history = detail::build_scripts(
        config, kHistoricalSalt, config.n_training_prs, history_start, 120.0);

    std::map<std::string, RepoCorpus> base_corpora;
    {
        std::map<std::string, std::vector<EventRecord>> by_repo;
        for (const PrScript& script : history) {
            std::vector<EventRecord> events = detail::materialize(script);
            auto& sink = by_repo[script.repo_id];
            sink.insert(sink.end(), events.begin(), events.end());
        }
        for (auto& [repo_id, events] : by_repo) {
            std::stable_sort(events.begin(), events.end(),
                             [](const EventRecord& a, const EventRecord& b) {
                                 if (a.pr_id != b.pr_id) return a.pr_id < b.pr_id;
                                 return a.timestamp < b.timestamp;
                             });
            RepoCorpus& corpus = base_corpora[repo_id];
            corpus.repo_id = repo_id;
            for (const EventRecord& ev : events) append_event(corpus, ev);
        }
    }

    ModelRegistry registry;
    {
        std::vector<FeatureVector> X;
        std::vector<double> y;
        for (const auto& [repo_id, corpus] : base_corpora) {
            assemble_training_set(corpus, trial_start, X, y);
        }
        if (X.size() < 10) {
            throw ConfigInvalid("historical tranche too small to train on (" +
                                std::to_string(X.size()) + " usable PRs)");
        }
        TrainedModel model = fit(config.backend, X, y);
        model.trained_at = trial_start;
        model.window_start = trial_start - std::chrono::days{2 * 365};
        model.window_end = trial_start;
        registry.set_global(std::move(model));
    }

    EngineConfig lt_config;
    lt_config.mode = NudgeMode::LifetimeOnly;
    lt_config.quiet_hours = config.quiet_hours;
    lt_config.buffer_hours = config.buffer_hours;
    lt_config.scan_interval_hours = config.scan_interval_hours;
    EngineConfig full_config = lt_config;
    full_config.mode = NudgeMode::Full;

    std::map<TrialArm, ArmState> arms;
    for (TrialArm arm : {TrialArm::None, TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
        arms[arm].corpora = base_corpora;
    }

    const std::vector<PrScript> live = detail::build_scripts(
        config, kLiveSalt, config.n_prs, trial_start, config.spawn_span_days);
    std::vector<LivePr> prs(live.size());
    std::vector<Sampler> response_rng;
    response_rng.reserve(live.size());

    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;
    for (std::size_t i = 0; i < live.size(); ++i) {
        prs[i].script = &live[i];
        prs[i].arm = assign_arm(live[i].pr_id, config.seed, config.p_none, config.p_lt);
        response_rng.emplace_back(config.seed, kResponseSalt, std::uint64_t(i));
        queue.push(QueueItem{live[i].created_at, 0, i, 0});
    }
    const auto scan_seconds =
        std::chrono::seconds{std::llround(config.scan_interval_hours * 3600.0)};
    if (config.n_prs > 0) {
        queue.push(QueueItem{trial_start + scan_seconds, 2, 0, 0});
    }

    const auto corpus_of = [&](LivePr& pr) -> RepoCorpus& {
        return arms[pr.arm].corpora[pr.script->repo_id];
    };

    const auto schedule_next = [&](std::size_t index, Instant from) {
        LivePr& pr = prs[index];
        const detail::PlannedStep& step = pr.script->steps[pr.next_step];
        double factor = 1.0;
        if (auto it = pr.actor_factor.find(step.owner_id); it != pr.actor_factor.end()) {
            factor = it->second;
        }
        Instant due = advance(from, step.delay_hours * factor, step.business_time);
        if (due <= from) due = from + std::chrono::seconds{1};
        pr.cursor = from;
        pr.pending_due = due;
        ++pr.generation;
        queue.push(QueueItem{due, 1, index, pr.generation});
    };

    const auto fire_step = [&](std::size_t index) {
        LivePr& pr = prs[index];
        const detail::PlannedStep& step = pr.script->steps[pr.next_step];
        Instant at = pr.pending_due;
        if (at <= pr.last_event_at) at = pr.last_event_at + std::chrono::seconds{1};
        RepoCorpus& corpus = corpus_of(pr);
        int offset = 0;
        for (const detail::StepEvent& tmpl : step.events) {
            const EventRecord ev = detail::instantiate(
                *pr.script, tmpl, at + std::chrono::seconds{offset});
            append_event(corpus, ev);
            pr.last_event_at = ev.timestamp;
            if (ev.kind == EventKind::Merge || ev.kind == EventKind::Abandon) {
                pr.closed = true;
            }
            ++offset;
        }
        ++pr.next_step;
        if (!pr.closed && pr.next_step < pr.script->steps.size()) {
            schedule_next(index, pr.pending_due);
        }
    };

    std::map<std::string, std::size_t> pr_index_by_key;
    for (std::size_t i = 0; i < live.size(); ++i) {
        pr_index_by_key[pr_key(live[i].repo_id, live[i].pr_id)] = i;
    }

    const auto handle_notification = [&](const NotificationMessage& msg, Instant now) {
        auto found = pr_index_by_key.find(pr_key(msg.repo_id, msg.pr_id));
        if (found == pr_index_by_key.end()) return;  // historical PR; nothing pending
        const std::size_t index = found->second;
        LivePr& pr = prs[index];
        Sampler& rng = response_rng[index];
        ArmState& arm = arms[pr.arm];

        // The notification lands as a bot comment on the PR.
        {
            RepoCorpus& corpus = corpus_of(pr);
            Instant at = now;
            if (at <= pr.last_event_at) at = pr.last_event_at + std::chrono::seconds{1};
            EventRecord ev;
            ev.repo_id = msg.repo_id;
            ev.pr_id = msg.pr_id;
            ev.kind = EventKind::Comment;
            ev.actor_id = "nudge-service";
            ev.actor_name = "Nudge Service Bot";
            ev.timestamp = at;
            ev.payload = nlohmann::json{{"thread_id", "nudge"}, {"text", msg.body}};
            append_event(corpus, ev);
            pr.last_event_at = at;
        }

        if (pr.closed) return;

        const PullRequestRecord& record = corpus_of(pr).prs.at(msg.pr_id);
        const bool mistimed = !is_quiet(record, now, config.quiet_hours);
        if (mistimed) {
            // A nudge in the middle of active work annoys instead of helping.
            arm.ledger.resolve(msg.repo_id, msg.pr_id,
                               rng.bernoulli(0.8) ? Resolution::WontFix
                                                  : Resolution::NoResponse);
            return;
        }

        const auto factor_of = [&](const std::string& actor_id) {
            // Generated authors are dev-*, reviewers rev-*.
            return actor_id.rfind("dev-", 0) == 0
                       ? config.authors.nudge_response_factor
                       : config.reviewers.nudge_response_factor;
        };
        bool accelerated = false;
        for (const std::string& actor : msg.mentioned_actors) {
            const double factor = factor_of(actor);
            pr.actor_factor[actor] = factor;
            if (pr.next_step < pr.script->steps.size() &&
                pr.script->steps[pr.next_step].owner_id == actor) {
                const detail::PlannedStep& step = pr.script->steps[pr.next_step];
                const double remaining =
                    hours_between(now, pr.pending_due, step.business_time);
                Instant due = advance(now, remaining * factor, step.business_time);
                if (due <= now) due = now + std::chrono::seconds{1};
                if (due < pr.pending_due) {
                    pr.pending_due = due;
                    ++pr.generation;
                    queue.push(QueueItem{due, 1, index, pr.generation});
                    accelerated = true;
                }
            }
        }

        const double overdue_hours =
            std::max(0.0, double((now - record.created_at).count()) / 3600.0 -
                              config.buffer_hours);
        const double p_resolved =
            std::min(0.9, 0.45 + 0.1 * (overdue_hours / 168.0)) * (accelerated ? 1.0 : 0.85);
        if (rng.bernoulli(p_resolved)) {
            arm.ledger.resolve(msg.repo_id, msg.pr_id, Resolution::Resolved);
        } else if (rng.bernoulli(0.25)) {
            arm.ledger.resolve(msg.repo_id, msg.pr_id, Resolution::WontFix);
        } else {
            arm.ledger.resolve(msg.repo_id, msg.pr_id, Resolution::NoResponse);
        }
    };

    const auto run_scans = [&](Instant now) {
        for (TrialArm arm_id : {TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
            ArmState& arm = arms[arm_id];
            const EngineConfig& cfg =
                arm_id == TrialArm::NudgeLT ? lt_config : full_config;
            for (auto& [repo_id, corpus] : arm.corpora) {
                ScanResult result =
                    scan(corpus, registry, arm.ledger, arm.predictions, cfg, now);
                for (const NotificationMessage& msg : result.messages) {
                    handle_notification(msg, now);
                }
            }
        }
    };

    while (!queue.empty()) {
        const QueueItem item = queue.top();
        if (item.time > horizon_end) break;
        queue.pop();
        if (item.kind == 0) {
            LivePr& pr = prs[item.pr_index];
            RepoCorpus& corpus = corpus_of(pr);
            int offset = 0;
            for (const detail::StepEvent& tmpl : pr.script->creation_events) {
                const EventRecord ev = detail::instantiate(
                    *pr.script, tmpl, pr.script->created_at + std::chrono::seconds{offset});
                append_event(corpus, ev);
                pr.last_event_at = ev.timestamp;
                ++offset;
            }
            pr.spawned = true;
            if (!pr.script->steps.empty()) {
                schedule_next(item.pr_index, pr.script->created_at);
            }
        } else if (item.kind == 1) {
            LivePr& pr = prs[item.pr_index];
            if (pr.closed || item.generation != pr.generation) continue;
            fire_step(item.pr_index);
        } else {
            run_scans(item.time);
            const Instant next = item.time + scan_seconds;
            if (next <= horizon_end) queue.push(QueueItem{next, 2, 0, 0});
        }
    }

    TrialReport report;
    for (TrialArm arm_id : {TrialArm::None, TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
        report.arms[arm_id] = ArmStats{};
        report.lifetimes[arm_id] = {};
    }
    for (std::size_t i = 0; i < prs.size(); ++i) {
        LivePr& pr = prs[i];
        if (!pr.spawned) continue;
        ArmStats& stats = report.arms[pr.arm];
        const auto& corpus = arms[pr.arm].corpora[pr.script->repo_id];
        const PullRequestRecord& record = corpus.prs.at(pr.script->pr_id);
        if (record.closed_at && *record.closed_at <= horizon_end) {
            const double lifetime = lifetime_hours(record, *record.closed_at);
            report.lifetimes[pr.arm].push_back(lifetime);
            stats.avg_lifetime_hours += lifetime;
            ++stats.pr_count;
        } else {
            ++stats.censored;
        }
    }
    for (auto& [arm_id, stats] : report.arms) {
        if (stats.pr_count > 0) stats.avg_lifetime_hours /= double(stats.pr_count);
    }

    for (TrialArm arm_id : {TrialArm::NudgeLT, TrialArm::NudgeFULL}) {
        ArmState& arm = arms[arm_id];
        CompletionBuckets buckets;
        for (const auto& [repo_id, corpus] : arm.corpora) {
            const CompletionBuckets partial = bucket_completions(arm.ledger, corpus);
            buckets.within_one_day += partial.within_one_day;
            buckets.within_three_days += partial.within_three_days;
            buckets.within_one_week += partial.within_one_week;
            buckets.over_one_week += partial.over_one_week;
        }
        report.buckets[arm_id] = buckets;
        report.resolutions[arm_id] = resolution_stats(arm.ledger);
        (arm_id == TrialArm::NudgeLT ? report.notified_lt : report.notified_full) =
            int(arm.ledger.size());
    }

    const double none_avg = report.arms[TrialArm::None].avg_lifetime_hours;
    if (none_avg > 0.0) {
        report.reduction_lt_pct =
            reduction_pct(none_avg, report.arms[TrialArm::NudgeLT].avg_lifetime_hours);
        report.reduction_full_pct =
            reduction_pct(none_avg, report.arms[TrialArm::NudgeFULL].avg_lifetime_hours);
    }
    return report;
}

}  // namespace nudge::sim
