#include "nudge/feature_extraction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <ostream>

#include "nudge/errors.hpp"

namespace nudge {
namespace {

constexpr double kHoursPerDay = 24.0;

constexpr FeatureKind kCat = FeatureKind::Categorical;
constexpr FeatureKind kBin = FeatureKind::Binary;
constexpr FeatureKind kDis = FeatureKind::Discrete;
constexpr FeatureKind kCon = FeatureKind::Continuous;

constexpr bool keep(double corr) {
    return corr > kCorrelationCutoff || corr < -kCorrelationCutoff;
}

constexpr FeatureSpec spec(std::string_view name, FeatureKind kind, double corr) {
    return FeatureSpec{name, kind, corr, keep(corr)};
}

// Raw table indices; the enum order is the published row order.
enum RawFeature : std::size_t {
    kDayOfWeek = 0,
    kAuthorAvgLifetime,
    kRequiredReviewerCount,
    kEditsCsproj,
    kPathAvgLifetime,
    kDistinctFileTypes,
    kDescriptionWordCount,
    kEditsConfig,
    kRepoActivePrCount,
    kChurnPerClass,
    kTotalChurn,
    kMethodsChurned,
    kIsFeature,
    kLinesChanged,
    kDistinctPaths,
    kConditionalsTouched,
    kLoopsTouched,
    kClassesTouched,
    kIsRefactor,
    kReferencesChanged,
    kFilesModified,
    kIsMergeChange,
    kIsDeprecation,
    kTitleWordCount,
    kCreatedBusinessHours,
    kIsBugFix,
    kAuthorTeamTenureDays,
    kAuthorRepoTenureDays,
    kAuthorCompanyTenureDays,
};

const std::array<FeatureSpec, kRawFeatureCount> kFeatureTable = {
    spec("day_of_week", kCat, 0.163),
    spec("author_avg_lifetime", kCon, 0.159),
    spec("required_reviewer_count", kDis, 0.131),
    spec("edits_csproj", kBin, 0.103),
    spec("path_avg_lifetime", kCon, 0.089),
    spec("distinct_file_types", kDis, 0.084),
    spec("description_word_count", kDis, 0.072),
    spec("edits_config", kBin, 0.059),
    spec("repo_active_pr_count", kDis, 0.058),
    spec("churn_per_class", kDis, 0.055),
    spec("total_churn", kDis, 0.039),
    spec("methods_churned", kDis, 0.037),
    spec("is_feature", kBin, 0.033),
    spec("lines_changed", kDis, 0.031),
    spec("distinct_paths", kDis, 0.031),
    spec("conditionals_touched", kDis, 0.029),
    spec("loops_touched", kDis, 0.028),
    spec("classes_touched", kDis, 0.021),
    spec("is_refactor", kBin, 0.021),
    spec("references_changed", kDis, 0.017),
    spec("files_modified", kDis, 0.016),
    spec("is_merge_change", kBin, 0.008),
    spec("is_deprecation", kBin, -0.001),
    spec("title_word_count", kDis, -0.001),
    spec("created_business_hours", kBin, -0.019),
    spec("is_bug_fix", kBin, -0.028),
    spec("author_team_tenure_days", kCon, -0.031),
    spec("author_repo_tenure_days", kCon, -0.046),
    spec("author_company_tenure_days", kCon, -0.056),
};

int word_count(std::string_view text) {
    int count = 0;
    bool in_word = false;
    for (char ch : text) {
        const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            current.push_back(ch);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

bool equals_ci(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

// Whole-token match of a keyword or one of its regular inflections
// (fix/fixes/fixed/fixing, merge/merging, deprecate/deprecating, ...).
bool has_token_ci(const std::vector<std::string>& tokens, std::string_view keyword) {
    std::string base(keyword);
    std::string stem = base;
    if (!stem.empty() && stem.back() == 'e') stem.pop_back();
    const std::array<std::string, 6> forms = {base,        base + "s",  base + "es",
                                              base + "d",  base + "ed", stem + "ing"};
    for (const std::string& token : tokens) {
        for (const std::string& form : forms) {
            if (equals_ci(token, form)) return true;
        }
    }
    return false;
}

struct ChurnAtInstant {
    ChurnSummary totals;  // additive counters summed, set-cardinality counters maxed
    bool any = false;
};

ChurnAtInstant churn_as_of(const PullRequestRecord& pr, Instant as_of) {
    ChurnAtInstant agg;
    for (const Iteration& it : pr.iterations) {
        if (it.timestamp > as_of) continue;
        agg.any = true;
        const ChurnSummary& c = it.churn;
        agg.totals.total_churn_lines += c.total_churn_lines;
        agg.totals.lines_changed += c.lines_changed;
        agg.totals.methods_churned += c.methods_churned;
        agg.totals.classes_touched += c.classes_touched;
        agg.totals.conditionals_touched += c.conditionals_touched;
        agg.totals.loops_touched += c.loops_touched;
        agg.totals.references_changed += c.references_changed;
        // Counts stand in for set cardinalities, so union is approximated
        // by the maximum across iterations.
        agg.totals.files_modified = std::max(agg.totals.files_modified, c.files_modified);
        agg.totals.distinct_paths = std::max(agg.totals.distinct_paths, c.distinct_paths);
        agg.totals.distinct_file_types =
            std::max(agg.totals.distinct_file_types, c.distinct_file_types);
        agg.totals.edits_csproj = agg.totals.edits_csproj || c.edits_csproj;
        agg.totals.edits_config = agg.totals.edits_config || c.edits_config;
    }
    return agg;
}

double tenure_days(Instant as_of, Instant joined) {
    return double((as_of - joined).count()) / 86400.0;
}

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Binary: return "binary";
        case FeatureKind::Discrete: return "discrete";
        case FeatureKind::Continuous: return "continuous";
    }
    return "?";
}

const std::array<FeatureSpec, kRawFeatureCount>& feature_table() {
    return kFeatureTable;
}

const std::vector<std::string>& retained_feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const FeatureSpec& s : kFeatureTable) {
            if (s.retained) out.emplace_back(s.name);
        }
        return out;
    }();
    return names;
}

int retained_index(std::size_t raw_index) {
    static const std::vector<int> mapping = [] {
        std::vector<int> out(kRawFeatureCount, -1);
        int next = 0;
        for (std::size_t i = 0; i < kRawFeatureCount; ++i) {
            if (kFeatureTable[i].retained) out[i] = next++;
        }
        return out;
    }();
    return mapping[raw_index];
}

void write_feature_spec_csv(std::ostream& out) {
    out << "name,kind,paper_correlation,retained\n";
    for (const FeatureSpec& s : kFeatureTable) {
        out << s.name << "," << to_string(s.kind) << "," << s.paper_correlation
            << "," << (s.retained ? "true" : "false") << "\n";
    }
}

AggregateCache refresh_cache(const RepoCorpus& corpus, Instant as_of,
                             int window_years) {
    AggregateCache cache;
    cache.computed_at = as_of;

    std::map<std::string, std::vector<double>> by_author;
    std::map<std::string, std::vector<double>> by_path;
    std::vector<double> all_lifetimes;
    for (const PullRequestRecord* pr : training_window(corpus, as_of, window_years)) {
        const double lifetime = lifetime_hours(*pr, *pr->closed_at);
        by_author[pr->author.id].push_back(lifetime);
        for (const std::string& path : pr->project_paths) {
            by_path[path].push_back(lifetime);
        }
        all_lifetimes.push_back(lifetime);
    }
    for (const auto& [author, xs] : by_author) {
        cache.author_avg_lifetime[author] = mean_of(xs);
    }
    for (const auto& [path, xs] : by_path) {
        cache.path_avg_lifetime[path] = mean_of(xs);
    }
    if (!all_lifetimes.empty()) {
        cache.global_avg_lifetime_hours = mean_of(all_lifetimes);
        cache.has_global_avg = true;
    }

    for (const auto& [pr_id, pr] : corpus.prs) {
        if (pr.created_at > as_of) continue;
        const bool open_at_as_of = !pr.closed_at || *pr.closed_at > as_of;
        if (open_at_as_of) ++cache.repo_active_pr_count;
    }

    for (const auto& [pr_id, events] : corpus.events) {
        for (const EventRecord& ev : events) {
            if (ev.timestamp > as_of) continue;
            auto [it, inserted] =
                cache.author_first_activity.emplace(ev.actor_id, ev.timestamp);
            if (!inserted && ev.timestamp < it->second) it->second = ev.timestamp;
        }
    }
    for (const auto& [pr_id, pr] : corpus.prs) {
        if (pr.created_at > as_of) continue;
        if (pr.author_team_join) {
            auto [it, inserted] =
                cache.author_team_join.emplace(pr.author.id, *pr.author_team_join);
            if (!inserted && *pr.author_team_join < it->second) it->second = *pr.author_team_join;
        }
        if (pr.author_company_join) {
            auto [it, inserted] =
                cache.author_company_join.emplace(pr.author.id, *pr.author_company_join);
            if (!inserted && *pr.author_company_join < it->second) {
                it->second = *pr.author_company_join;
            }
        }
    }
    const auto mean_instant = [](const std::map<std::string, Instant>& m)
        -> std::optional<Instant> {
        if (m.empty()) return std::nullopt;
        __int128 sum = 0;
        for (const auto& [id, t] : m) sum += t.time_since_epoch().count();
        return Instant{std::chrono::seconds{
            static_cast<std::int64_t>(sum / __int128(m.size()))}};
    };
    cache.mean_team_join = mean_instant(cache.author_team_join);
    cache.mean_company_join = mean_instant(cache.author_company_join);
    return cache;
}

std::vector<double> extract_raw(const PullRequestRecord& pr, const RepoCorpus& corpus,
                                const AggregateCache& cache, Instant as_of,
                                std::vector<bool>* missing,
                                const CalendarPolicy& policy) {
    (void)corpus;
    std::vector<double> v(kRawFeatureCount, 0.0);
    std::vector<bool> mask(kRawFeatureCount, false);

    const double global_mean = cache.has_global_avg ? cache.global_avg_lifetime_hours : 0.0;

    v[kDayOfWeek] = double(day_of_week(pr.created_at, policy));
    v[kCreatedBusinessHours] = within_business_hours(pr.created_at, policy) ? 1.0 : 0.0;
    v[kRequiredReviewerCount] = double(pr.required_reviewers.size());
    v[kDescriptionWordCount] = double(word_count(pr.description));
    v[kTitleWordCount] = double(word_count(pr.title));

    if (auto it = cache.author_avg_lifetime.find(pr.author.id);
        it != cache.author_avg_lifetime.end()) {
        v[kAuthorAvgLifetime] = it->second;
    } else {
        v[kAuthorAvgLifetime] = global_mean;
        mask[kAuthorAvgLifetime] = true;
    }

    {
        double sum = 0.0;
        int hits = 0;
        for (const std::string& path : pr.project_paths) {
            if (auto it = cache.path_avg_lifetime.find(path);
                it != cache.path_avg_lifetime.end()) {
                sum += it->second;
                ++hits;
            }
        }
        if (hits > 0) {
            v[kPathAvgLifetime] = sum / double(hits);
        } else {
            v[kPathAvgLifetime] = global_mean;
            mask[kPathAvgLifetime] = true;
        }
    }

    v[kRepoActivePrCount] = double(cache.repo_active_pr_count);

    const ChurnAtInstant churn = churn_as_of(pr, as_of);
    const ChurnSummary& c = churn.totals;
    v[kEditsCsproj] = c.edits_csproj ? 1.0 : 0.0;
    v[kEditsConfig] = c.edits_config ? 1.0 : 0.0;
    v[kDistinctFileTypes] = double(c.distinct_file_types);
    v[kTotalChurn] = double(c.total_churn_lines);
    v[kMethodsChurned] = double(c.methods_churned);
    v[kLinesChanged] = double(c.lines_changed);
    v[kDistinctPaths] = double(c.distinct_paths);
    v[kConditionalsTouched] = double(c.conditionals_touched);
    v[kLoopsTouched] = double(c.loops_touched);
    v[kClassesTouched] = double(c.classes_touched);
    v[kFilesModified] = double(c.files_modified);
    v[kChurnPerClass] = c.classes_touched > 0
                            ? double(c.total_churn_lines) / double(c.classes_touched)
                            : 0.0;

    v[kIsFeature] = pr.intent_flags.is_feature ? 1.0 : 0.0;
    v[kIsRefactor] = pr.intent_flags.is_refactor ? 1.0 : 0.0;
    v[kIsMergeChange] = pr.intent_flags.is_merge_change ? 1.0 : 0.0;
    v[kIsDeprecation] = pr.intent_flags.is_deprecation ? 1.0 : 0.0;
    v[kIsBugFix] = pr.intent_flags.is_bug_fix ? 1.0 : 0.0;

    if (auto it = cache.author_first_activity.find(pr.author.id);
        it != cache.author_first_activity.end() && it->second <= as_of) {
        v[kAuthorRepoTenureDays] = tenure_days(as_of, it->second);
    } else {
        // The author's create event itself is their first known activity.
        v[kAuthorRepoTenureDays] = tenure_days(as_of, std::min(pr.created_at, as_of));
        mask[kAuthorRepoTenureDays] = true;
    }

    const auto tenure_or_mean = [&](const std::map<std::string, Instant>& joins,
                                    const std::optional<Instant>& mean_join,
                                    std::size_t index) {
        if (auto it = joins.find(pr.author.id); it != joins.end()) {
            v[index] = tenure_days(as_of, it->second);
        } else if (mean_join) {
            v[index] = tenure_days(as_of, *mean_join);
            mask[index] = true;
        } else {
            v[index] = 0.0;
            mask[index] = true;
        }
    };
    tenure_or_mean(cache.author_team_join, cache.mean_team_join, kAuthorTeamTenureDays);
    tenure_or_mean(cache.author_company_join, cache.mean_company_join,
                   kAuthorCompanyTenureDays);

    if (missing) *missing = std::move(mask);
    return v;
}

FeatureVector extract(const PullRequestRecord& pr, const RepoCorpus& corpus,
                      const AggregateCache& cache, Instant as_of,
                      const CalendarPolicy& policy) {
    if (!corpus.prs.count(pr.id)) {
        throw UnknownPr("pr " + pr.id + " is not in corpus " + corpus.repo_id);
    }
    std::vector<bool> raw_mask;
    const std::vector<double> raw = extract_raw(pr, corpus, cache, as_of, &raw_mask, policy);

    FeatureVector fv;
    fv.pr_id = pr.id;
    fv.as_of = as_of;
    fv.values.reserve(kRetainedFeatureCount);
    fv.missing_mask.reserve(kRetainedFeatureCount);
    for (std::size_t i = 0; i < kRawFeatureCount; ++i) {
        if (!kFeatureTable[i].retained) continue;
        fv.values.push_back(raw[i]);
        fv.missing_mask.push_back(raw_mask[i]);
    }
    return fv;
}

std::vector<CorrelationEntry> correlation_report(
    const std::vector<std::vector<double>>& raw_rows,
    const std::vector<double>& lifetimes) {
    if (raw_rows.size() != lifetimes.size() || raw_rows.size() < 3) {
        throw InsufficientData("correlation analysis needs at least 3 samples");
    }
    const std::size_t n = lifetimes.size();
    const double y_mean = mean_of(lifetimes);
    double y_var = 0.0;
    for (double y : lifetimes) y_var += (y - y_mean) * (y - y_mean);
    if (y_var == 0.0) {
        throw DegenerateInput("dependent variable is constant");
    }

    std::vector<CorrelationEntry> entries;
    for (std::size_t f = 0; f < kRawFeatureCount; ++f) {
        CorrelationEntry entry;
        entry.feature = std::string(kFeatureTable[f].name);
        double x_mean = 0.0;
        for (const std::vector<double>& row : raw_rows) x_mean += row.at(f);
        x_mean /= double(n);
        double xy = 0.0, xx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = raw_rows[i][f] - x_mean;
            xy += dx * (lifetimes[i] - y_mean);
            xx += dx * dx;
        }
        if (xx == 0.0) {
            entry.correlation = 0.0;
            entry.degenerate = true;
        } else {
            entry.correlation = xy / std::sqrt(xx * y_var);
        }
        entries.push_back(std::move(entry));
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const CorrelationEntry& a, const CorrelationEntry& b) {
                         return a.correlation > b.correlation;
                     });
    return entries;
}

void build_raw_dataset(const RepoCorpus& corpus, Instant as_of,
                       std::vector<std::vector<double>>& rows,
                       std::vector<double>& lifetimes, int window_years) {
    rows.clear();
    lifetimes.clear();
    for (const PullRequestRecord* pr : training_window(corpus, as_of, window_years)) {
        const Instant at = pr->created_at + std::chrono::seconds{1};
        const AggregateCache cache = refresh_cache(corpus, at, window_years);
        rows.push_back(extract_raw(*pr, corpus, cache, at));
        lifetimes.push_back(lifetime_hours(*pr, *pr->closed_at));
    }
}

IntentFlags classify_intent(std::string_view title, std::string_view description) {
    std::string text = std::string(title) + " " + std::string(description);
    const std::string lower = lowercase(text);
    const std::vector<std::string> tokens = tokenize(text);

    const auto any_token = [&](std::initializer_list<std::string_view> keywords) {
        for (std::string_view k : keywords) {
            if (has_token_ci(tokens, k)) return true;
        }
        return false;
    };
    const auto any_phrase = [&](std::initializer_list<std::string_view> phrases) {
        for (std::string_view p : phrases) {
            if (lower.find(p) != std::string::npos) return true;
        }
        return false;
    };
    const auto acronym = [&](std::string_view word) {
        for (const std::string& token : tokens) {
            if (token == word) return true;
        }
        return false;
    };

    IntentFlags flags;
    flags.is_bug_fix = any_token({"fix", "bug", "crash", "incident"});
    flags.is_feature = any_token({"add", "feature", "implement"});
    flags.is_refactor = any_token({"refactor", "cleanup", "rename"});
    flags.is_deprecation = any_token({"deprecate"}) || any_phrase({"remove legacy"});
    flags.is_merge_change = any_token({"merge"}) || any_phrase({"forward integration"}) ||
                            acronym("FI") || acronym("RI");
    return flags;
}

}  // namespace nudge
