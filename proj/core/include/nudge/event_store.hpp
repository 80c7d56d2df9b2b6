#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nudge/event_record.hpp"
#include "nudge/pr_domain.hpp"

namespace nudge {

/// The per-repository PR corpus: derived records plus the event history they
/// replay from. Records are rebuilt deterministically from the history, so
/// ingest order never matters.
struct RepoCorpus {
    std::string repo_id;
    std::map<std::string, PullRequestRecord> prs;
    std::optional<Instant> ingest_watermark;  ///< max ingested timestamp
    std::map<std::string, std::vector<EventRecord>> events;  ///< per PR, sorted

    bool operator==(const RepoCorpus&) const = default;
};

struct IngestIssue {
    int line = -1;           ///< 1-based line number, -1 when not line-bound
    std::string pr_id;
    std::string message;
};

struct IngestReport {
    int lines_read = 0;
    int events_applied = 0;
    int events_deduplicated = 0;
    std::vector<IngestIssue> issues;
    std::set<std::string> touched_prs;
};

/// Ingests line-delimited EventRecords into the corpus. Events are
/// deduplicated by (repo, pr, kind, timestamp, actor), sorted per PR by
/// (timestamp, kind rank) and replayed. Malformed lines and illegal
/// transitions are reported, not thrown; re-ingesting identical lines is a
/// no-op.
IngestReport ingest(RepoCorpus& corpus, std::istream& in);
IngestReport ingest_file(RepoCorpus& corpus, const std::filesystem::path& path);

/// Replays a PR's sorted event list into a record. Events whose application
/// fails are skipped and reported through `issues` when non-null.
std::optional<PullRequestRecord> replay(const std::vector<EventRecord>& events,
                                        std::vector<IngestIssue>* issues = nullptr);

/// Merged PRs whose closed_at lies within `window_years` before `as_of` and
/// whose lifetime is inside the [24, 336] hour training band. Abandoned PRs
/// never qualify.
std::vector<const PullRequestRecord*> training_window(const RepoCorpus& corpus,
                                                      Instant as_of,
                                                      int window_years = 2);

constexpr double kMinTrainingLifetimeHours = 24.0;
constexpr double kMaxTrainingLifetimeHours = 336.0;

/// How a notification was eventually handled.
enum class Resolution { Pending, Resolved, WontFix, NoResponse };

std::string_view to_string(Resolution r);
Resolution resolution_from_string(std::string_view text);

struct LedgerEntry {
    std::string repo_id;
    std::string pr_id;
    Instant notified_at{};
    std::vector<std::string> actors;
    Resolution resolution = Resolution::Pending;

    bool operator==(const LedgerEntry&) const = default;
};

/// At most one notification per pull request, ever.
class NotificationLedger {
  public:
    bool contains(const std::string& repo_id, const std::string& pr_id) const;
    /// Throws Error when an entry for the PR already exists.
    void insert(LedgerEntry entry);
    /// Throws UnknownNotification when no entry exists.
    void resolve(const std::string& repo_id, const std::string& pr_id, Resolution r);
    const LedgerEntry* find(const std::string& repo_id, const std::string& pr_id) const;

    const std::map<std::string, LedgerEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    bool operator==(const NotificationLedger&) const = default;

  private:
    std::map<std::string, LedgerEntry> entries_;  // key: repo_id + '/' + pr_id
};

/// A saved lifetime prediction for one PR.
struct Prediction {
    double tp_hours = 0.0;    ///< predicted lifetime, clamped
    Instant computed_at{};
    Instant due_at{};         ///< Tn = Tc + Tp + buffer

    bool operator==(const Prediction&) const = default;
};

using PredictionMap = std::map<std::string, Prediction>;  // key: repo_id + '/' + pr_id

std::string pr_key(const std::string& repo_id, const std::string& pr_id);

/// Everything the engine persists between runs. Models are stored as
/// serialized blobs so this header stays independent of the model types.
struct EngineState {
    std::map<std::string, RepoCorpus> corpora;
    NotificationLedger ledger;
    PredictionMap predictions;
    std::map<std::string, std::string> models;  ///< name -> serialized model

    bool operator==(const EngineState&) const = default;
};

constexpr int kStoreFormatVersion = 1;

/// Persists the state as a directory: a manifest with the format version,
/// one JSONL event file per repository, and JSON snapshots for the ledger,
/// predictions and models.
void save_state(const EngineState& state, const std::filesystem::path& dir);

/// Loads a directory written by save_state, replaying events to rebuild the
/// corpora. Throws CorruptStore on missing/garbled files and VersionMismatch
/// on an unknown format version.
EngineState load_state(const std::filesystem::path& dir);

}  // namespace nudge
