#include "lessonlab/seg_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "lessonlab/error.hpp"

namespace lessonlab {

namespace {

std::vector<Region> sorted_by_start(std::vector<Region> regions) {
    std::stable_sort(regions.begin(), regions.end(),
                     [](const Region& a, const Region& b) { return a.start < b.start; });
    return regions;
}

Region make_region(std::string id, double start, double end) {
    Region r;
    r.id = std::move(id);
    r.start = start;
    r.end = end;
    r.track = Track::Instrument;
    r.source = RegionSource::Auto;
    return r;
}

} // namespace

// ---------------------------------------------------------------------------
// Frame level
// ---------------------------------------------------------------------------

FrameLabeling regions_to_frames(const std::vector<Region>& regions, double duration, double frame_seconds) {
    if (!(frame_seconds > 0.0) || duration < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "frame length must be positive and duration non-negative");
    }
    const auto sorted = sorted_by_start(regions);
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].start < sorted[k - 1].end) {
            throw Error(ErrorCode::InvalidArgument,
                        "regions " + sorted[k - 1].id + " and " + sorted[k].id + " overlap");
        }
    }

    FrameLabeling out;
    out.frame_seconds = frame_seconds;
    const auto n = static_cast<std::size_t>(std::ceil(duration / frame_seconds - 1e-9));
    out.labels.assign(n, false);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double center = (static_cast<double>(i) + 0.5) * frame_seconds;
        while (r < sorted.size() && sorted[r].end <= center) ++r;
        out.labels[i] = r < sorted.size() && sorted[r].start <= center && center < sorted[r].end;
    }
    return out;
}

FrameMetrics frame_metrics(const FrameLabeling& predicted, const FrameLabeling& truth) {
    if (predicted.labels.size() != truth.labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "frame labelings differ in length");
    }
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        const bool p = predicted.labels[i];
        const bool t = truth.labels[i];
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    FrameMetrics m;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

// ---------------------------------------------------------------------------
// Segment level
// ---------------------------------------------------------------------------

BoundarySet regions_to_boundaries(const std::vector<Region>& regions, double granularity) {
    if (!(granularity > 0.0)) throw Error(ErrorCode::InvalidArgument, "granularity must be positive");
    BoundarySet out;
    for (const auto& r : regions) {
        out.positions.push_back(static_cast<int>(std::lround(r.start / granularity)));
        out.positions.push_back(static_cast<int>(std::lround(r.end / granularity)));
    }
    std::sort(out.positions.begin(), out.positions.end());
    out.positions.erase(std::unique(out.positions.begin(), out.positions.end()), out.positions.end());
    return out;
}

double BoundaryAlignment::cost(int near_miss_window) const {
    return static_cast<double>(transposition_distance) / near_miss_window + static_cast<double>(full_misses);
}

double BoundaryAlignment::similarity(int near_miss_window) const {
    const std::size_t edits = pairs.size() + full_misses;
    if (edits == 0) return 1.0;
    return 1.0 - cost(near_miss_window) / static_cast<double>(edits);
}

// On a line an optimal matching never needs crossing pairs, so an
// edit-distance style DP over the two sorted sequences finds it. Costs are
// kept in integer units of 1/window so ties compare exactly.
BoundaryAlignment align_boundaries(const BoundarySet& a, const BoundarySet& b, int near_miss_window) {
    if (near_miss_window < 1) throw Error(ErrorCode::InvalidArgument, "near-miss window must be >= 1");
    const auto& x = a.positions;
    const auto& y = b.positions;
    const std::size_t n = x.size();
    const std::size_t m = y.size();
    const long miss = near_miss_window;

    struct Cell {
        long cost = 0;
        std::size_t pairs = 0;
        char move = 0;  // 'a': x unpaired, 'b': y unpaired, 'p': paired
    };
    auto better = [](long c1, std::size_t p1, const Cell& cur) {
        return c1 < cur.cost || (c1 == cur.cost && p1 < cur.pairs);
    };

    std::vector<Cell> dp((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= m; ++j) {
            if (i == 0 && j == 0) continue;
            Cell best;
            best.cost = std::numeric_limits<long>::max();
            best.pairs = std::numeric_limits<std::size_t>::max();
            if (i > 0) {
                const Cell& c = at(i - 1, j);
                if (better(c.cost + miss, c.pairs, best)) best = {c.cost + miss, c.pairs, 'a'};
            }
            if (j > 0) {
                const Cell& c = at(i, j - 1);
                if (better(c.cost + miss, c.pairs, best)) best = {c.cost + miss, c.pairs, 'b'};
            }
            if (i > 0 && j > 0) {
                const long d = std::labs(static_cast<long>(x[i - 1]) - y[j - 1]);
                if (d < near_miss_window) {
                    const Cell& c = at(i - 1, j - 1);
                    if (better(c.cost + d, c.pairs + 1, best)) best = {c.cost + d, c.pairs + 1, 'p'};
                }
            }
            at(i, j) = best;
        }
    }

    BoundaryAlignment out;
    for (std::size_t i = n, j = m; i > 0 || j > 0;) {
        const Cell& c = at(i, j);
        if (c.move == 'p') {
            out.pairs.emplace_back(x[i - 1], y[j - 1]);
            out.transposition_distance += std::labs(static_cast<long>(x[i - 1]) - y[j - 1]);
            --i;
            --j;
        } else if (c.move == 'a') {
            ++out.full_misses;
            --i;
        } else {
            ++out.full_misses;
            --j;
        }
    }
    std::reverse(out.pairs.begin(), out.pairs.end());
    return out;
}

double boundary_similarity(const BoundarySet& a, const BoundarySet& b, int near_miss_window) {
    return align_boundaries(a, b, near_miss_window).similarity(near_miss_window);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

std::vector<Region> random_baseline(const std::vector<Region>& truth, double duration, std::uint64_t seed) {
    if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pick(0.0, duration);
    std::vector<double> points(2 * truth.size());
    for (auto& p : points) p = pick(rng);
    std::sort(points.begin(), points.end());

    std::vector<Region> out;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        out.push_back(make_region("random-" + std::to_string(k), points[2 * k], points[2 * k + 1]));
    }
    return out;
}

std::vector<Region> uniform_baseline(const std::vector<Region>& truth, double duration) {
    if (truth.empty()) throw Error(ErrorCode::InvalidArgument, "uniform baseline needs truth regions");
    if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");

    const auto sorted = sorted_by_start(truth);
    double total = 0.0;
    for (const auto& r : sorted) total += r.length();
    const double k = static_cast<double>(sorted.size());
    const double length = total / k;

    // Mean spacing between consecutive truth regions; a single region has
    // no spacing, so the leftover time is spread instead.
    double gap = 0.0;
    if (sorted.size() > 1) {
        for (std::size_t i = 1; i < sorted.size(); ++i) gap += std::max(0.0, sorted[i].start - sorted[i - 1].end);
        gap /= k - 1.0;
    } else {
        gap = std::max(0.0, duration - total) / k;
    }

    std::vector<Region> out;
    if (!(length > 0.0)) return out;
    for (double t = 0.0; t < duration - 1e-9; t += length + gap) {
        out.push_back(make_region("uniform-" + std::to_string(out.size()), t, std::min(t + length, duration)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

MetricSet evaluate_entry(const std::vector<Region>& predicted, const std::vector<Region>& truth, double duration,
                         const EvalSettings& settings) {
    const auto fm = frame_metrics(regions_to_frames(predicted, duration, settings.frame_seconds),
                                  regions_to_frames(truth, duration, settings.frame_seconds));
    MetricSet m;
    m.precision = fm.precision;
    m.recall = fm.recall;
    m.f1 = fm.f1;
    m.boundary_similarity = boundary_similarity(regions_to_boundaries(predicted, settings.granularity),
                                                regions_to_boundaries(truth, settings.granularity),
                                                settings.near_miss_window);
    return m;
}

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    for (double v : values) out.mean += v;
    out.mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(var / n);
    return out;
}

EvalReport evaluate_corpus(const std::vector<EvalEntry>& entries, const EvalSettings& settings) {
    if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "evaluation corpus is empty");

    EvalReport report;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        report.entry_names.push_back(e.name);
        const auto random = random_baseline(e.truth, e.duration, settings.seed + k);
        const auto uniform = e.truth.empty() ? std::vector<Region>{} : uniform_baseline(e.truth, e.duration);
        report.per_entry[kConditionAlgorithm].push_back(evaluate_entry(e.predicted, e.truth, e.duration, settings));
        report.per_entry[kConditionRandom].push_back(evaluate_entry(random, e.truth, e.duration, settings));
        report.per_entry[kConditionUniform].push_back(evaluate_entry(uniform, e.truth, e.duration, settings));
    }

    for (const auto& [condition, metrics] : report.per_entry) {
        auto column = [&](auto field) {
            std::vector<double> v;
            for (const auto& m : metrics) v.push_back(m.*field);
            return mean_sd(v);
        };
        report.summary[condition] = ConditionSummary{column(&MetricSet::precision), column(&MetricSet::recall),
                                                     column(&MetricSet::f1),
                                                     column(&MetricSet::boundary_similarity)};
    }
    return report;
}

std::string format_eval_table(const EvalReport& report) {
    const char* conditions[] = {kConditionAlgorithm, kConditionRandom, kConditionUniform};
    const char* headers[] = {"Algorithm-Human", "Random-Human", "Uniform-Human"};
    struct Row {
        const char* label;
        MeanSd ConditionSummary::*field;
    };
    const Row rows[] = {{"Precision", &ConditionSummary::precision},
                        {"Recall", &ConditionSummary::recall},
                        {"F1 Score", &ConditionSummary::f1},
                        {"Boundary Similarity", &ConditionSummary::boundary_similarity}};

    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-22s%-18s%-18s%-18s\n", "", headers[0], headers[1], headers[2]);
    os << line;
    for (const auto& row : rows) {
        std::string cells[3];
        for (int c = 0; c < 3; ++c) {
            const auto it = report.summary.find(conditions[c]);
            const MeanSd v = it == report.summary.end() ? MeanSd{} : it->second.*(row.field);
            char cell[40];
            std::snprintf(cell, sizeof cell, "%.3f (%.2f)", v.mean, v.sd);
            cells[c] = cell;
        }
        std::snprintf(line, sizeof line, "%-22s%-18s%-18s%-18s\n", row.label, cells[0].c_str(), cells[1].c_str(),
                      cells[2].c_str());
        os << line;
    }
    return os.str();
}

} // namespace lessonlab
