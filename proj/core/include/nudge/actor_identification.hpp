#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nudge/pr_domain.hpp"

namespace nudge {

/// The five mutually exclusive stall reasons.
enum class BlockerClass {
    UnaddressedComments,
    NeedsDiscussion,
    ApprovedNotMerged,
    ReviewNotStarted,
    AddressedNotApproved,
};

std::string_view to_string(BlockerClass c);

enum class WaitingOn { Author, Reviewers };

/// Who blocks the PR and who should be mentioned.
struct BlockerVerdict {
    BlockerClass blocker_class;
    WaitingOn waiting_on;
    std::vector<std::string> actors;  ///< author id, or reviewer ids

    bool operator==(const BlockerVerdict&) const = default;
};

/// Classifies a non-terminal PR by evaluating the blocker rules in order:
///   1. an approval vote is outstanding and no negative vote remains
///      -> ApprovedNotMerged, author;
///   2. a reviewer-authored thread is Active or Pending
///      -> UnaddressedComments, author;
///   3. a -5 vote is outstanding with every thread resolved
///      -> NeedsDiscussion, author;
///   4. no reviewer threads and no outstanding votes
///      -> ReviewNotStarted, all required reviewers;
///   5. otherwise -> AddressedNotApproved, the reviewers who commented
///      (all required reviewers when nobody commented).
/// Exactly one rule fires. Throws TerminalPr for merged/abandoned PRs.
BlockerVerdict identify(const PullRequestRecord& pr);

}  // namespace nudge
