#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lessonlab/notes.hpp"
#include "lessonlab/region.hpp"

namespace lessonlab {

/// Half-open index interval [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    bool operator==(const IndexRange&) const = default;
};

struct MismatchSpan {
    IndexRange target;
    IndexRange recording;
    bool operator==(const MismatchSpan&) const = default;
};

/// Contiguous equal run: target[a .. a+size) == recording[b .. b+size).
struct MatchingBlock {
    std::size_t target_begin = 0;
    std::size_t recording_begin = 0;
    std::size_t size = 0;
    bool operator==(const MatchingBlock&) const = default;
};

struct ScoreReport {
    double score_percent = 0.0;
    std::size_t matched_count = 0;
    std::size_t target_count = 0;
    std::vector<std::string> missed_notes;
    std::vector<MismatchSpan> mismatch_spans;
    bool overridden = false;
    std::optional<double> manual_score;

    /// The manual score when overridden, otherwise the automatic one.
    double effective_score() const;
    /// Exactly 100: every target note matched, or a manual 100.
    bool perfect() const;
};

std::size_t lcs_length(std::span<const int> a, std::span<const int> b);

/// Target indices matched by the canonical optimal alignment, which keeps
/// the matched target indices lexicographically smallest.
std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(std::span<const int> target,
                                                               std::span<const int> recording);

/// Recursive longest-contiguous-match decomposition (difflib style); ends
/// with a zero-size sentinel block at (|target|, |recording|).
std::vector<MatchingBlock> matching_blocks(std::span<const int> target, std::span<const int> recording);

std::vector<MismatchSpan> mismatch_blocks(std::span<const int> target, std::span<const int> recording);

/// Throws EmptyTarget when the target has no notes.
ScoreReport score_performance(const NoteSequence& target, const NoteSequence& recording);
ScoreReport score_midi(std::span<const int> target, std::span<const int> recording);

struct TimeInterval {
    double start = 0.0;
    double end = 0.0;
    bool operator==(const TimeInterval&) const = default;
};

struct SpanTimes {
    TimeInterval target;
    TimeInterval recording;
};

std::vector<SpanTimes> spans_to_time(const std::vector<MismatchSpan>& spans, const NoteSequence& target,
                                     const NoteSequence& recording);

struct QueryCandidate {
    Region region;
    NoteSequence sequence;
};

/// Candidates scoring strictly above match_threshold with the query as the
/// target, in timeline order. Throws EmptyQuery.
std::vector<Region> query_regions(const NoteSequence& query, const std::vector<QueryCandidate>& candidates,
                                  double match_threshold = 80.0);

/// Throws InvalidArgument outside [0, 100].
ScoreReport apply_manual_score(const ScoreReport& report, double manual);

} // namespace lessonlab
