#include <doctest.h>

#include <map>
#include <set>

#include "nudge/actor_identification.hpp"
#include "nudge/errors.hpp"
#include "support/oracles.hpp"

using namespace nudge;
using fixtures::event;

namespace {

struct Config {
    int n_reviewers = 2;
    // Latest vote per reviewer: 0 means never voted / cleared.
    std::vector<int> votes;
    // One thread per reviewer with this status; -1 means no thread.
    std::vector<int> thread_status;  // index into ThreadStatus, -1 absent
};

/// Builds a PR whose outstanding votes and reviewer threads match `config`
/// exactly. Vote values are injected directly so any combination (including
/// ones the state machine would split across updates) is reachable.
PullRequestRecord build_pr(const Config& config) {
    PullRequestRecord pr = open_pull_request(event(
        "r", "pr1", EventKind::Create, "dev-1", "2024-03-04T09:00:00Z",
        fixtures::create_payload([&] {
            std::vector<std::string> reviewers;
            for (int i = 0; i < config.n_reviewers; ++i) {
                reviewers.push_back("rev-" + std::to_string(i));
            }
            return reviewers;
        }())));
    Instant t = pr.created_at;
    for (int i = 0; i < config.n_reviewers; ++i) {
        t += std::chrono::hours{1};
        if (config.votes[std::size_t(i)] != 0) {
            pr.votes.push_back(Vote{"rev-" + std::to_string(i),
                                    config.votes[std::size_t(i)], t});
        }
        if (config.thread_status[std::size_t(i)] >= 0) {
            CommentThread thread;
            thread.id = "t" + std::to_string(i);
            thread.author = "rev-" + std::to_string(i);
            thread.status = ThreadStatus(config.thread_status[std::size_t(i)]);
            thread.comments.push_back(Comment{thread.author, "please change", t});
            pr.threads.push_back(std::move(thread));
        }
    }
    pr.state = PrState::Active;  // non-terminal; identify ignores the label
    return pr;
}

/// Independent re-statement of the five ordered rules, evaluated directly on
/// the configuration grid rather than on the record.
BlockerClass expected_class(const Config& config) {
    bool any_approval = false, any_negative = false, any_wait = false;
    for (int vote : config.votes) {
        if (vote > 0) any_approval = true;
        if (vote < 0) any_negative = true;
        if (vote == -5) any_wait = true;
    }
    bool any_open_thread = false, any_thread = false;
    for (int status : config.thread_status) {
        if (status < 0) continue;
        any_thread = true;
        if (ThreadStatus(status) == ThreadStatus::Active ||
            ThreadStatus(status) == ThreadStatus::Pending) {
            any_open_thread = true;
        }
    }
    const bool any_vote = any_approval || any_negative;
    if (any_approval && !any_negative) return BlockerClass::ApprovedNotMerged;
    if (any_open_thread) return BlockerClass::UnaddressedComments;
    if (any_wait && !any_open_thread) return BlockerClass::NeedsDiscussion;
    if (!any_thread && !any_vote) return BlockerClass::ReviewNotStarted;
    return BlockerClass::AddressedNotApproved;
}

}  // namespace

TEST_CASE("approved PR waits on the author to merge") {
    Config config{1, {10}, {-1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::ApprovedNotMerged);
    CHECK(verdict.waiting_on == WaitingOn::Author);
    CHECK(verdict.actors == std::vector<std::string>{"dev-1"});
}

TEST_CASE("approval with suggestions counts as approval") {
    Config config{1, {5}, {-1}};
    CHECK(identify(build_pr(config)).blocker_class == BlockerClass::ApprovedNotMerged);
}

TEST_CASE("an outstanding negative vote outranks an approval") {
    Config config{2, {10, -5}, {-1, -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::NeedsDiscussion);
    CHECK(verdict.waiting_on == WaitingOn::Author);
}

TEST_CASE("open reviewer threads wait on the author") {
    Config config{2, {0, 0}, {int(ThreadStatus::Active), -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::UnaddressedComments);
    CHECK(verdict.actors == std::vector<std::string>{"dev-1"});
}

TEST_CASE("untouched PR waits on every required reviewer") {
    Config config{3, {0, 0, 0}, {-1, -1, -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::ReviewNotStarted);
    CHECK(verdict.waiting_on == WaitingOn::Reviewers);
    CHECK(verdict.actors == std::vector<std::string>{"rev-0", "rev-1", "rev-2"});
}

TEST_CASE("resolved threads with no approval wait on the commenting reviewers") {
    // Reviewer A's thread is resolved, reviewer B never commented, no votes:
    // only branch (5) matches, and only A is mentioned.
    Config config{2, {0, 0}, {int(ThreadStatus::Resolved), -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::AddressedNotApproved);
    CHECK(verdict.waiting_on == WaitingOn::Reviewers);
    CHECK(verdict.actors == std::vector<std::string>{"rev-0"});
}

TEST_CASE("rejected with resolved threads falls to addressed-not-approved") {
    Config config{2, {-10, 0}, {int(ThreadStatus::WontFix), -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::AddressedNotApproved);
    CHECK(verdict.actors == std::vector<std::string>{"rev-0"});
}

TEST_CASE("rejection with no threads notifies all required reviewers") {
    Config config{2, {-10, 0}, {-1, -1}};
    const BlockerVerdict verdict = identify(build_pr(config));
    CHECK(verdict.blocker_class == BlockerClass::AddressedNotApproved);
    CHECK(verdict.actors == std::vector<std::string>{"rev-0", "rev-1"});
}

TEST_CASE("bot threads are invisible to the flowchart") {
    PullRequestRecord pr = build_pr(Config{1, {0}, {-1}});
    CommentThread bot_thread;
    bot_thread.id = "bot";
    bot_thread.author = "buildbot";
    bot_thread.status = ThreadStatus::Active;
    bot_thread.comments.push_back(
        Comment{"buildbot", "validation failed", pr.created_at});
    pr.participants["buildbot"] = "BuildBot";
    pr.threads.push_back(bot_thread);
    const BlockerVerdict verdict = identify(pr);
    CHECK(verdict.blocker_class == BlockerClass::ReviewNotStarted);
}

TEST_CASE("terminal PRs are rejected") {
    PullRequestRecord pr = build_pr(Config{1, {10}, {-1}});
    pr.state = PrState::Merged;
    pr.closed_at = pr.created_at + std::chrono::hours{4};
    CHECK_THROWS_AS(identify(pr), TerminalPr);
}

TEST_CASE("exactly one branch fires for every bounded configuration") {
    // Exhaustive grid: 1..3 reviewers, votes in {-10,-5,0,5,10}, threads in
    // {absent, Active, Pending, Resolved, WontFix, Closed} per reviewer.
    const std::vector<int> vote_values = {-10, -5, 0, 5, 10};
    const std::vector<int> thread_values = {-1, 0, 1, 2, 3, 4};
    long checked = 0;
    for (int n = 1; n <= 3; ++n) {
        std::vector<std::size_t> vote_idx(std::size_t(n), 0);
        std::vector<std::size_t> thread_idx(std::size_t(n), 0);
        const long combos = long(std::pow(double(vote_values.size() *
                                                 thread_values.size()),
                                          double(n)));
        for (long code = 0; code < combos; ++code) {
            long rest = code;
            Config config;
            config.n_reviewers = n;
            config.votes.resize(std::size_t(n));
            config.thread_status.resize(std::size_t(n));
            for (int i = 0; i < n; ++i) {
                config.votes[std::size_t(i)] =
                    vote_values[std::size_t(rest % long(vote_values.size()))];
                rest /= long(vote_values.size());
                config.thread_status[std::size_t(i)] =
                    thread_values[std::size_t(rest % long(thread_values.size()))];
                rest /= long(thread_values.size());
            }
            const PullRequestRecord pr = build_pr(config);
            const BlockerVerdict verdict = identify(pr);
            // Totality plus exclusivity: the verdict equals the first (and
            // therefore unique) matching rule of the independent table.
            CHECK(verdict.blocker_class == expected_class(config));
            CHECK_FALSE(verdict.actors.empty());
            if (verdict.waiting_on == WaitingOn::Author) {
                CHECK(verdict.actors == std::vector<std::string>{pr.author.id});
            } else {
                std::set<std::string> reviewer_ids;
                for (const Actor& r : pr.required_reviewers) reviewer_ids.insert(r.id);
                for (const std::string& actor : verdict.actors) {
                    CHECK(reviewer_ids.count(actor) == 1);
                }
            }
            ++checked;
        }
    }
    CHECK(checked == 30 + 900 + 27000);
}

TEST_CASE("stratified 200-PR corpus replays the blocker table counts") {
    // 34 unaddressed-comments, 47 needs-discussion, 49 approved-not-merged,
    // 51 review-not-started, 19 addressed-not-approved.
    const std::map<BlockerClass, int> strata = {
        {BlockerClass::UnaddressedComments, 34},
        {BlockerClass::NeedsDiscussion, 47},
        {BlockerClass::ApprovedNotMerged, 49},
        {BlockerClass::ReviewNotStarted, 51},
        {BlockerClass::AddressedNotApproved, 19},
    };
    int built = 0;
    std::map<BlockerClass, int> recovered;
    int salt = 0;
    for (const auto& [blocker_class, count] : strata) {
        for (int i = 0; i < count; ++i) {
            Config config;
            config.n_reviewers = 1 + (salt++ % 3);
            config.votes.assign(std::size_t(config.n_reviewers), 0);
            config.thread_status.assign(std::size_t(config.n_reviewers), -1);
            switch (blocker_class) {
                case BlockerClass::UnaddressedComments:
                    config.thread_status[0] = int(i % 2 ? ThreadStatus::Active
                                                        : ThreadStatus::Pending);
                    if (i % 3 == 0) config.votes[0] = -5;
                    break;
                case BlockerClass::NeedsDiscussion:
                    config.votes[0] = -5;
                    if (i % 2 && config.n_reviewers > 1) {
                        config.thread_status[1] = int(ThreadStatus::Resolved);
                    }
                    break;
                case BlockerClass::ApprovedNotMerged:
                    config.votes[0] = i % 4 ? 10 : 5;
                    if (i % 3 == 0) {
                        config.thread_status[0] = int(ThreadStatus::Resolved);
                    }
                    break;
                case BlockerClass::ReviewNotStarted:
                    break;  // nothing happened yet
                case BlockerClass::AddressedNotApproved:
                    config.thread_status[0] =
                        int(i % 2 ? ThreadStatus::Resolved : ThreadStatus::WontFix);
                    break;
            }
            const BlockerVerdict verdict = identify(build_pr(config));
            CHECK(verdict.blocker_class == blocker_class);
            ++recovered[verdict.blocker_class];
            ++built;
        }
    }
    CHECK(built == 200);
    for (const auto& [blocker_class, count] : strata) {
        CHECK(recovered[blocker_class] == count);
    }
}
