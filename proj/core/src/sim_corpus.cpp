#include <algorithm>
#include <fstream>

#include "nudge/errors.hpp"
#include "sim_script.hpp"

namespace nudge::sim {
namespace detail {
namespace {

using nlohmann::json;

const std::vector<std::string> kAreas = {
    "parser",   "scheduler", "billing", "auth",    "telemetry",
    "importer", "cache",     "gateway", "renderer", "indexer"};

const std::vector<std::string> kPathPool = {
    "src/core",         "src/api",   "src/ui",    "src/infra", "docs",
    "test",             "build",     "services/auth", "services/billing",
    "tools"};

const std::vector<std::string> kTitleTemplates = {
    "Fix crash in %s",
    "Fix flaky %s tests",
    "Add caching to %s",
    "Add feature flags for %s",
    "Implement retries in %s",
    "Refactor %s pipeline",
    "Cleanup unused settings in %s",
    "Rename internals of %s",
    "Deprecate legacy %s endpoints",
    "Remove legacy hooks from %s",
    "Merge release branch into %s",
    "FI from main into %s",
    "Update dependencies for %s",
    "Tune thresholds in %s",
    "Handle edge cases in %s",
    "Improve logging in %s",
};

const std::vector<std::string> kDescriptionWords = {
    "this",   "change",  "updates", "the",      "handling", "of",
    "requests", "and",   "adds",    "coverage", "for",      "regressions",
    "seen",   "in",      "production", "it",    "also",     "tightens",
    "validation", "around", "inputs", "before", "dispatch", "while",
    "keeping", "compatibility", "with", "existing", "clients"};

std::string format_area(const std::string& tmpl, const std::string& area) {
    const std::size_t pos = tmpl.find("%s");
    if (pos == std::string::npos) return tmpl;
    return tmpl.substr(0, pos) + area + tmpl.substr(pos + 2);
}

json churn_payload(Sampler& rng, bool initial) {
    const std::uint64_t files = 1 + rng.uniform_index(initial ? 12 : 5);
    const std::uint64_t lines = 5 + std::uint64_t(rng.lognormal_mean(60.0, 1.0));
    const std::uint64_t total = lines + rng.uniform_index(lines + 1);
    json churn;
    churn["total_churn_lines"] = total;
    churn["lines_changed"] = lines;
    churn["files_modified"] = files;
    churn["distinct_paths"] = 1 + rng.uniform_index(files);
    churn["distinct_file_types"] = 1 + rng.uniform_index(std::min<std::uint64_t>(files, 4));
    churn["methods_churned"] = rng.uniform_index(12);
    churn["classes_touched"] = rng.uniform_index(6);
    churn["conditionals_touched"] = rng.uniform_index(15);
    churn["loops_touched"] = rng.uniform_index(8);
    churn["references_changed"] = rng.uniform_index(4);
    churn["edits_csproj"] = rng.bernoulli(0.15);
    churn["edits_config"] = rng.bernoulli(0.2);
    return json{{"churn", churn}};
}

struct Cast {
    std::string author_id, author_name;
    std::vector<std::string> reviewer_ids;
    std::vector<std::string> reviewer_names;
};

Cast pick_cast(const SimConfig& config, Sampler& rng) {
    Cast cast;
    const int author = int(rng.uniform_index(std::uint64_t(config.author_pool)));
    cast.author_id = "dev-" + std::to_string(author);
    cast.author_name = "Dev " + std::to_string(author);
    const int n_reviewers = 1 + int(rng.uniform_index(3));
    while (int(cast.reviewer_ids.size()) < n_reviewers) {
        const int r = int(rng.uniform_index(std::uint64_t(config.reviewer_pool)));
        const std::string id = "rev-" + std::to_string(r);
        if (std::find(cast.reviewer_ids.begin(), cast.reviewer_ids.end(), id) !=
            cast.reviewer_ids.end()) {
            continue;
        }
        cast.reviewer_ids.push_back(id);
        cast.reviewer_names.push_back("Rev " + std::to_string(r));
    }
    return cast;
}

}  // namespace

EventRecord instantiate(const PrScript& script, const StepEvent& tmpl, Instant at) {
    EventRecord ev;
    ev.repo_id = script.repo_id;
    ev.pr_id = script.pr_id;
    ev.kind = tmpl.kind;
    ev.actor_id = tmpl.actor_id;
    ev.actor_name = tmpl.actor_name;
    ev.timestamp = at;
    ev.payload = tmpl.payload;
    return ev;
}

Instant step_due(const PrScript& script, std::size_t index, Instant previous,
                 double delay_scale) {
    const PlannedStep& step = script.steps[index];
    const double delay = step.delay_hours * delay_scale;
    Instant due = step.business_time ? advance_business_hours(previous, delay)
                                     : previous + std::chrono::seconds{std::llround(
                                                      delay * 3600.0)};
    if (due <= previous) due = previous + std::chrono::seconds{1};
    return due;
}

std::vector<PrScript> build_scripts(const SimConfig& config, std::uint64_t phase_salt,
                                    int count, Instant start, double span_days) {
    std::vector<PrScript> scripts;
    scripts.reserve(std::size_t(count));
    for (int pr_index = 0; pr_index < count; ++pr_index) {
        Sampler rng(config.seed, phase_salt, std::uint64_t(pr_index));
        PrScript script;
        const int repo = count == 0 ? 0 : pr_index % std::max(1, config.n_repos);
        script.repo_id = "repo-" + std::to_string(repo);
        script.pr_id = "pr-" + std::to_string(phase_salt) + "-" + std::to_string(pr_index);
        script.created_at =
            start + std::chrono::seconds{std::int64_t(
                        rng.uniform(0.0, span_days * 86400.0))};

        const Cast cast = pick_cast(config, rng);
        const std::string& area = kAreas[rng.uniform_index(kAreas.size())];
        const std::string title =
            format_area(kTitleTemplates[rng.uniform_index(kTitleTemplates.size())], area);
        std::string description;
        const int words = 5 + int(rng.uniform_index(25));
        for (int w = 0; w < words; ++w) {
            if (w) description += " ";
            description += kDescriptionWords[rng.uniform_index(kDescriptionWords.size())];
        }

        // Join dates: company first, team later, both before creation.
        const double company_days_back = rng.uniform(200.0, 3000.0);
        const double team_days_back = rng.uniform(30.0, company_days_back);
        const auto days_back = [&](double d) {
            return script.created_at - std::chrono::seconds{std::int64_t(d * 86400.0)};
        };

        json create_payload;
        create_payload["title"] = title;
        create_payload["description"] = description;
        json reviewers = json::array();
        for (std::size_t i = 0; i < cast.reviewer_ids.size(); ++i) {
            reviewers.push_back(
                {{"id", cast.reviewer_ids[i]}, {"name", cast.reviewer_names[i]}});
        }
        create_payload["reviewers"] = reviewers;
        json paths = json::array();
        const int n_paths = 1 + int(rng.uniform_index(3));
        for (int p = 0; p < n_paths; ++p) {
            paths.push_back(kPathPool[(rng.uniform_index(kPathPool.size()))]);
        }
        create_payload["paths"] = paths;
        create_payload["author_team_join"] = format_rfc3339(days_back(team_days_back));
        create_payload["author_company_join"] =
            format_rfc3339(days_back(company_days_back));

        script.creation_events.push_back(
            StepEvent{EventKind::Create, cast.author_id, cast.author_name, create_payload});
        script.creation_events.push_back(StepEvent{EventKind::UpdateIteration,
                                                   cast.author_id, cast.author_name,
                                                   churn_payload(rng, true)});

        // Review choreography. Delays are shaped afterwards so that the
        // business-hour lifetime matches the sampled target.
        const bool abandoned = rng.bernoulli(config.p_abandon);
        const int rounds = 1 + int(rng.uniform_index(std::uint64_t(config.max_review_rounds)));
        int thread_counter = 0;
        std::vector<int> open_threads;
        std::vector<int> negative_voters;

        const auto reviewer_step = [&](std::size_t reviewer_index, bool allow_reject) {
            PlannedStep step;
            step.owner_id = cast.reviewer_ids[reviewer_index];
            step.business_time = config.reviewers.weekend_inactive;
            step.delay_hours =
                rng.lognormal_mean(config.reviewers.mean_response_hours,
                                   config.reviewers.sigma_log);
            const double move = rng.uniform01();
            if (move < 0.55) {
                const int thread_id = thread_counter++;
                open_threads.push_back(thread_id);
                step.events.push_back(StepEvent{
                    EventKind::Comment, step.owner_id,
                    cast.reviewer_names[reviewer_index],
                    json{{"thread_id", "t" + std::to_string(thread_id)},
                         {"text", "Please double-check the " + area + " changes here."}}});
            }
            int vote = 0;
            if (move < 0.25) {
                vote = -5;
            } else if (allow_reject && move >= 0.97) {
                vote = -10;
            } else if (move >= 0.55 && move < 0.8) {
                vote = -5;
            }
            if (vote != 0) {
                step.events.push_back(StepEvent{EventKind::Vote, step.owner_id,
                                                cast.reviewer_names[reviewer_index],
                                                json{{"value", vote}}});
                negative_voters.push_back(int(reviewer_index));
            }
            if (step.events.empty()) {
                const int thread_id = thread_counter++;
                open_threads.push_back(thread_id);
                step.events.push_back(StepEvent{
                    EventKind::Comment, step.owner_id,
                    cast.reviewer_names[reviewer_index],
                    json{{"thread_id", "t" + std::to_string(thread_id)},
                         {"text", "Left a question on the " + area + " path."}}});
            }
            script.steps.push_back(std::move(step));
        };

        const auto author_step = [&](bool push_update) {
            PlannedStep step;
            step.owner_id = cast.author_id;
            step.business_time = config.authors.weekend_inactive;
            step.delay_hours = rng.lognormal_mean(config.authors.mean_response_hours,
                                                  config.authors.sigma_log);
            for (int thread_id : open_threads) {
                step.events.push_back(StepEvent{
                    EventKind::ThreadStatusChange, cast.author_id, cast.author_name,
                    json{{"thread_id", "t" + std::to_string(thread_id)},
                         {"status", rng.bernoulli(0.85) ? "resolved" : "wontfix"}}});
            }
            open_threads.clear();
            if (push_update) {
                step.events.push_back(StepEvent{EventKind::UpdateIteration, cast.author_id,
                                                cast.author_name,
                                                churn_payload(rng, false)});
            }
            script.steps.push_back(std::move(step));
        };

        for (int round = 0; round < rounds; ++round) {
            const std::size_t acting =
                1 + rng.uniform_index(cast.reviewer_ids.size());
            for (std::size_t r = 0; r < acting; ++r) {
                reviewer_step(r, round > 0);
            }
            if (rng.bernoulli(config.p_bot_comment)) {
                PlannedStep bot;
                bot.owner_id = "ci-bot";
                bot.business_time = false;
                bot.delay_hours = rng.uniform(0.2, 2.0);
                const int thread_id = thread_counter++;
                bot.events.push_back(StepEvent{
                    EventKind::Comment, "ci-bot", "CI Build Bot",
                    json{{"thread_id", "t" + std::to_string(thread_id)},
                         {"text", "Build validation passed for iteration."}}});
                script.steps.push_back(std::move(bot));
            }
            if (abandoned && round + 1 == rounds) break;
            author_step(true);
        }

        if (abandoned) {
            PlannedStep quit;
            quit.owner_id = cast.author_id;
            quit.business_time = config.authors.weekend_inactive;
            quit.delay_hours = rng.lognormal_mean(
                config.authors.mean_response_hours * 2.0, config.authors.sigma_log);
            quit.events.push_back(
                StepEvent{EventKind::Abandon, cast.author_id, cast.author_name, nlohmann::json::object()});
            script.steps.push_back(std::move(quit));
        } else {
            // Everyone with an outstanding negative vote re-votes; make sure
            // at least one approval lands before the merge.
            std::vector<int> voters(negative_voters);
            std::sort(voters.begin(), voters.end());
            voters.erase(std::unique(voters.begin(), voters.end()), voters.end());
            if (voters.empty()) voters.push_back(0);
            for (int reviewer_index : voters) {
                PlannedStep approve;
                approve.owner_id = cast.reviewer_ids[std::size_t(reviewer_index)];
                approve.business_time = config.reviewers.weekend_inactive;
                approve.delay_hours =
                    rng.lognormal_mean(config.reviewers.mean_response_hours,
                                       config.reviewers.sigma_log);
                approve.events.push_back(
                    StepEvent{EventKind::Vote, approve.owner_id,
                              cast.reviewer_names[std::size_t(reviewer_index)],
                              json{{"value", rng.bernoulli(0.3) ? 5 : 10}}});
                script.steps.push_back(std::move(approve));
            }
            PlannedStep merge;
            merge.owner_id = cast.author_id;
            merge.business_time = config.authors.weekend_inactive;
            merge.delay_hours = rng.uniform(0.5, 8.0);
            merge.events.push_back(
                StepEvent{EventKind::Merge, cast.author_id, cast.author_name, nlohmann::json::object()});
            script.steps.push_back(std::move(merge));
        }

        // Scale every delay so the business-hour lifetime hits the sample.
        double planned = 0.0;
        for (const PlannedStep& step : script.steps) planned += step.delay_hours;
        double target = rng.lognormal_mean(config.target_mean_lifetime_hours,
                                           config.lifetime_sigma_log);
        target = std::clamp(target, config.min_lifetime_hours, config.max_lifetime_hours);
        const double scale = planned > 0.0 ? target / planned : 1.0;
        for (PlannedStep& step : script.steps) step.delay_hours *= scale;
        script.planned_lifetime_hours = target;

        scripts.push_back(std::move(script));
    }
    return scripts;
}

std::vector<EventRecord> materialize(const PrScript& script) {
    std::vector<EventRecord> events;
    Instant cursor = script.created_at;
    Instant last = cursor;
    int offset = 0;
    for (const StepEvent& tmpl : script.creation_events) {
        events.push_back(instantiate(script, tmpl, cursor + std::chrono::seconds{offset}));
        last = events.back().timestamp;
        ++offset;
    }
    for (std::size_t i = 0; i < script.steps.size(); ++i) {
        Instant due = step_due(script, i, cursor, 1.0);
        if (due <= last) due = last + std::chrono::seconds{1};
        int event_offset = 0;
        for (const StepEvent& tmpl : script.steps[i].events) {
            events.push_back(
                instantiate(script, tmpl, due + std::chrono::seconds{event_offset}));
            ++event_offset;
        }
        last = events.back().timestamp;
        cursor = due;
    }
    return events;
}

}  // namespace detail

void append_event(RepoCorpus& corpus, const EventRecord& ev) {
    if (corpus.repo_id.empty()) corpus.repo_id = ev.repo_id;
    auto& history = corpus.events[ev.pr_id];
    history.push_back(ev);
    auto it = corpus.prs.find(ev.pr_id);
    if (it == corpus.prs.end()) {
        corpus.prs.emplace(ev.pr_id, open_pull_request(ev));
    } else {
        it->second = apply_event(it->second, ev);
    }
    if (!corpus.ingest_watermark || *corpus.ingest_watermark < ev.timestamp) {
        corpus.ingest_watermark = ev.timestamp;
    }
}

std::map<std::string, std::vector<EventRecord>> generate_corpus(const SimConfig& config) {
    validate(config);
    const Instant start = parse_rfc3339(config.trial_start);
    const std::vector<detail::PrScript> scripts = detail::build_scripts(
        config, /*phase_salt=*/0, config.n_prs, start, config.spawn_span_days);

    std::map<std::string, std::vector<EventRecord>> by_repo;
    for (const detail::PrScript& script : scripts) {
        std::vector<EventRecord> events = detail::materialize(script);
        auto& sink = by_repo[script.repo_id];
        sink.insert(sink.end(), std::make_move_iterator(events.begin()),
                    std::make_move_iterator(events.end()));
    }
    for (auto& [repo_id, events] : by_repo) {
        std::stable_sort(events.begin(), events.end(),
                         [](const EventRecord& a, const EventRecord& b) {
                             if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                             if (a.pr_id != b.pr_id) return a.pr_id < b.pr_id;
                             return tie_break_rank(a.kind) < tie_break_rank(b.kind);
                         });
    }
    return by_repo;
}

void write_event_logs(const std::map<std::string, std::vector<EventRecord>>& events,
                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [repo_id, repo_events] : events) {
        std::ofstream out(dir / (repo_id + ".jsonl"));
        if (!out) throw Error("cannot write event log for " + repo_id);
        for (const EventRecord& ev : repo_events) {
            out << to_jsonl(ev) << "\n";
        }
    }
}

std::string_view to_string(TrialArm arm) {
    switch (arm) {
        case TrialArm::None: return "none";
        case TrialArm::NudgeLT: return "nudge-lt";
        case TrialArm::NudgeFULL: return "nudge-full";
    }
    return "?";
}

TrialArm assign_arm(std::string_view pr_id, std::uint64_t seed, double p_none,
                    double p_lt) {
    // FNV-1a over the id bytes mixed with the seed; arm choice must depend on
    // nothing else, so assignment carries no selection bias.
    std::uint64_t h = 14695981039346656037ull ^ seed;
    for (char c : pr_id) {
        h ^= std::uint64_t(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    const double u = double(h >> 11) * 0x1.0p-53;
    if (u < p_none) return TrialArm::None;
    if (u < p_none + p_lt) return TrialArm::NudgeLT;
    return TrialArm::NudgeFULL;
}

}  // namespace nudge::sim
