#include "lessonlab/scoring.hpp"

#include <algorithm>
#include <tuple>

#include "lessonlab/error.hpp"

namespace lessonlab {

double ScoreReport::effective_score() const {
    return overridden && manual_score ? *manual_score : score_percent;
}

bool ScoreReport::perfect() const {
    if (overridden && manual_score) return *manual_score == 100.0;
    return target_count > 0 && matched_count == target_count;
}

namespace {

// suffix[i][j] = LCS of a[i:], b[j:], stored row-major with (|b|+1) columns.
std::vector<std::size_t> suffix_lcs_table(std::span<const int> a, std::span<const int> b) {
    const std::size_t cols = b.size() + 1;
    std::vector<std::size_t> t((a.size() + 1) * cols, 0);
    for (std::size_t i = a.size(); i-- > 0;) {
        for (std::size_t j = b.size(); j-- > 0;) {
            t[i * cols + j] = a[i] == b[j] ? t[(i + 1) * cols + j + 1] + 1
                                           : std::max(t[(i + 1) * cols + j], t[i * cols + j + 1]);
        }
    }
    return t;
}

} // namespace

std::size_t lcs_length(std::span<const int> a, std::span<const int> b) {
    // Two rolling rows of the prefix table.
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::pair<std::size_t, std::size_t>> lcs_alignment(std::span<const int> target,
                                                               std::span<const int> recording) {
    const auto t = suffix_lcs_table(target, recording);
    const std::size_t cols = recording.size() + 1;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < target.size() && j < recording.size()) {
        if (target[i] == recording[j]) {
            out.emplace_back(i, j);
            ++i;
            ++j;
        } else if (t[i * cols + j + 1] == t[i * cols + j]) {
            // Skipping a recording note keeps target[i] available.
            ++j;
        } else {
            ++i;
        }
    }
    return out;
}

namespace {

struct Match {
    std::size_t i;
    std::size_t j;
    std::size_t size;
};

// Longest contiguous common run within target[alo, ahi) x recording[blo, bhi);
// ties go to the earliest start in target, then in recording.
Match longest_match(std::span<const int> a, std::span<const int> b, std::size_t alo, std::size_t ahi,
                    std::size_t blo, std::size_t bhi) {
    Match best{alo, blo, 0};
    std::vector<std::size_t> prev(bhi - blo + 1, 0);
    std::vector<std::size_t> cur(bhi - blo + 1, 0);
    for (std::size_t i = alo; i < ahi; ++i) {
        for (std::size_t j = blo; j < bhi; ++j) {
            const std::size_t k = j - blo + 1;
            cur[k] = a[i] == b[j] ? prev[k - 1] + 1 : 0;
            if (cur[k] > 0) {
                const std::size_t start_i = i + 1 - cur[k];
                const std::size_t start_j = j + 1 - cur[k];
                if (cur[k] > best.size ||
                    (cur[k] == best.size && std::tie(start_i, start_j) < std::tie(best.i, best.j))) {
                    best = {start_i, start_j, cur[k]};
                }
            }
        }
        std::swap(prev, cur);
        std::fill(cur.begin(), cur.end(), 0);
    }
    return best;
}

} // namespace

std::vector<MatchingBlock> matching_blocks(std::span<const int> target, std::span<const int> recording) {
    std::vector<MatchingBlock> blocks;
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> pending{
        {0, target.size(), 0, recording.size()}};
    while (!pending.empty()) {
        const auto [alo, ahi, blo, bhi] = pending.back();
        pending.pop_back();
        if (alo >= ahi || blo >= bhi) continue;
        const Match m = longest_match(target, recording, alo, ahi, blo, bhi);
        if (m.size == 0) continue;
        blocks.push_back({m.i, m.j, m.size});
        pending.emplace_back(alo, m.i, blo, m.j);
        pending.emplace_back(m.i + m.size, ahi, m.j + m.size, bhi);
    }
    std::sort(blocks.begin(), blocks.end(), [](const MatchingBlock& x, const MatchingBlock& y) {
        return std::tie(x.target_begin, x.recording_begin) < std::tie(y.target_begin, y.recording_begin);
    });

    // Fuse blocks that ended up adjacent in both sequences.
    std::vector<MatchingBlock> fused;
    for (const auto& b : blocks) {
        if (!fused.empty() && fused.back().target_begin + fused.back().size == b.target_begin &&
            fused.back().recording_begin + fused.back().size == b.recording_begin) {
            fused.back().size += b.size;
        } else {
            fused.push_back(b);
        }
    }
    fused.push_back({target.size(), recording.size(), 0});
    return fused;
}

std::vector<MismatchSpan> mismatch_blocks(std::span<const int> target, std::span<const int> recording) {
    std::vector<MismatchSpan> spans;
    std::size_t i = 0;
    std::size_t j = 0;
    for (const auto& b : matching_blocks(target, recording)) {
        if (i < b.target_begin || j < b.recording_begin) {
            spans.push_back({{i, b.target_begin}, {j, b.recording_begin}});
        }
        i = b.target_begin + b.size;
        j = b.recording_begin + b.size;
    }
    return spans;
}

ScoreReport score_midi(std::span<const int> target, std::span<const int> recording) {
    if (target.empty()) {
        throw Error(ErrorCode::EmptyTarget, "reference has no notes to score against");
    }
    ScoreReport report;
    const auto alignment = lcs_alignment(target, recording);
    report.target_count = target.size();
    report.matched_count = alignment.size();
    report.score_percent =
        100.0 * static_cast<double>(report.matched_count) / static_cast<double>(report.target_count);

    std::vector<bool> covered(target.size(), false);
    for (const auto& [ti, ri] : alignment) covered[ti] = true;
    for (std::size_t k = 0; k < target.size(); ++k) {
        if (!covered[k]) report.missed_notes.push_back(midi_name(target[k]));
    }
    report.mismatch_spans = mismatch_blocks(target, recording);
    return report;
}

ScoreReport score_performance(const NoteSequence& target, const NoteSequence& recording) {
    const auto t = target.midi();
    const auto r = recording.midi();
    return score_midi(t, r);
}

std::vector<SpanTimes> spans_to_time(const std::vector<MismatchSpan>& spans, const NoteSequence& target,
                                     const NoteSequence& recording) {
    auto to_interval = [](const IndexRange& range, const std::vector<Note>& notes) {
        if (range.end > notes.size() || range.begin > range.end) {
            throw Error(ErrorCode::InvalidArgument, "span index out of range");
        }
        if (range.empty()) {
            // Zero-width marker at the insertion point.
            double t = 0.0;
            if (range.begin > 0) {
                const auto& prev = notes[range.begin - 1];
                t = prev.onset + prev.duration;
            } else if (!notes.empty()) {
                t = notes.front().onset;
            }
            return TimeInterval{t, t};
        }
        TimeInterval out{notes[range.begin].onset, notes[range.begin].onset + notes[range.begin].duration};
        for (std::size_t k = range.begin + 1; k < range.end; ++k) {
            out.start = std::min(out.start, notes[k].onset);
            out.end = std::max(out.end, notes[k].onset + notes[k].duration);
        }
        return out;
    };

    std::vector<SpanTimes> out;
    out.reserve(spans.size());
    for (const auto& s : spans) {
        out.push_back({to_interval(s.target, target.notes), to_interval(s.recording, recording.notes)});
    }
    return out;
}

std::vector<Region> query_regions(const NoteSequence& query, const std::vector<QueryCandidate>& candidates,
                                  double match_threshold) {
    if (query.empty()) throw Error(ErrorCode::EmptyQuery, "query has no notes");
    const auto q = query.midi();
    std::vector<Region> out;
    for (const auto& c : candidates) {
        const auto r = c.sequence.midi();
        const std::size_t matched = lcs_length(q, r);
        // Compare without dividing so that exact thresholds stay exact.
        if (100.0 * static_cast<double>(matched) > match_threshold * static_cast<double>(q.size())) {
            out.push_back(c.region);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Region& a, const Region& b) { return a.start < b.start; });
    return out;
}

ScoreReport apply_manual_score(const ScoreReport& report, double manual) {
    if (!(manual >= 0.0 && manual <= 100.0)) {
        throw Error(ErrorCode::InvalidArgument, "manual score must lie in [0, 100]");
    }
    ScoreReport out = report;
    out.overridden = true;
    out.manual_score = manual;
    return out;
}

} // namespace lessonlab
