#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nudge/event_store.hpp"
#include "nudge/pr_domain.hpp"

namespace nudge {

enum class FeatureKind { Categorical, Binary, Discrete, Continuous };

std::string_view to_string(FeatureKind kind);

/// One row of the published feature table. A feature is retained when the
/// absolute published correlation exceeds the 0.008 cutoff; exactly three
/// rows fall at or below it and are dropped.
struct FeatureSpec {
    std::string_view name;
    FeatureKind kind;
    double paper_correlation;
    bool retained;
};

constexpr std::size_t kRawFeatureCount = 29;
constexpr std::size_t kRetainedFeatureCount = 26;
constexpr double kCorrelationCutoff = 0.008;

/// All 29 table rows, in published order.
const std::array<FeatureSpec, kRawFeatureCount>& feature_table();

/// Names of the retained features, in table order. This is the model schema.
const std::vector<std::string>& retained_feature_names();

/// Index into the retained vector for a raw table index, or -1 if dropped.
int retained_index(std::size_t raw_index);

/// CSV dump of the table: name,kind,paper_correlation,retained.
void write_feature_spec_csv(std::ostream& out);

/// The retained feature values for one PR at one instant. Masked entries
/// carry the imputation value (the global training mean).
struct FeatureVector {
    std::string pr_id;
    Instant as_of{};
    std::vector<double> values;        ///< kRetainedFeatureCount entries
    std::vector<bool> missing_mask;

    bool operator==(const FeatureVector&) const = default;
};

/// Historic aggregates that are too expensive to mine per inference. Averages
/// cover only PRs that pass the training filter; join dates arrive on create
/// events; first-activity is mined from the event history.
struct AggregateCache {
    std::map<std::string, double> author_avg_lifetime;  ///< hours
    std::map<std::string, double> path_avg_lifetime;    ///< hours
    int repo_active_pr_count = 0;
    std::map<std::string, Instant> author_first_activity;
    std::map<std::string, Instant> author_team_join;
    std::map<std::string, Instant> author_company_join;
    Instant computed_at{};

    double global_avg_lifetime_hours = 0.0;
    bool has_global_avg = false;
    std::optional<Instant> mean_team_join;
    std::optional<Instant> mean_company_join;

    bool operator==(const AggregateCache&) const = default;
};

/// Recomputes every aggregate from scratch using only events at or before
/// `as_of`. Deterministic given (corpus, as_of).
AggregateCache refresh_cache(const RepoCorpus& corpus, Instant as_of,
                             int window_years = 2);

/// All 29 raw feature values for a PR at `as_of`, in table order. Only
/// information with timestamps at or before `as_of` is used, so extraction
/// at creation time is blind to later events. `missing` flags entries that
/// were imputed from global means.
std::vector<double> extract_raw(const PullRequestRecord& pr, const RepoCorpus& corpus,
                                const AggregateCache& cache, Instant as_of,
                                std::vector<bool>* missing = nullptr,
                                const CalendarPolicy& policy = {});

/// The retained projection of extract_raw. Throws UnknownPr when the PR is
/// not part of the corpus.
FeatureVector extract(const PullRequestRecord& pr, const RepoCorpus& corpus,
                      const AggregateCache& cache, Instant as_of,
                      const CalendarPolicy& policy = {});

struct CorrelationEntry {
    std::string feature;
    double correlation = 0.0;
    bool degenerate = false;  ///< constant feature; correlation reported as 0
};

/// Pearson correlation of each raw feature column against the lifetime,
/// sorted descending. Requires >= 3 samples and a non-constant dependent
/// variable (DegenerateInput otherwise).
std::vector<CorrelationEntry> correlation_report(
    const std::vector<std::vector<double>>& raw_rows,
    const std::vector<double>& lifetimes);

/// Builds (raw feature rows, lifetimes) over the training window of a corpus,
/// extracting every PR at its creation instant.
void build_raw_dataset(const RepoCorpus& corpus, Instant as_of,
                       std::vector<std::vector<double>>& rows,
                       std::vector<double>& lifetimes, int window_years = 2);

/// Keyword heuristic for PR intent. Single keywords match whole tokens
/// case-insensitively, phrases match as substrings, and the FI/RI acronyms
/// match as exact uppercase tokens.
IntentFlags classify_intent(std::string_view title, std::string_view description);

}  // namespace nudge
