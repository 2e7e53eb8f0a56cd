#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lessonlab/region.hpp"

namespace lessonlab {

struct FrameLabeling {
    double frame_seconds = 0.02;
    std::vector<bool> labels;
};

/// Sorted, strictly increasing boundary positions in granularity units.
struct BoundarySet {
    std::vector<int> positions;
    bool operator==(const BoundarySet&) const = default;
};

struct FrameMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Frame i is positive when its center lies in [start, end) of some region.
/// Throws InvalidArgument for overlapping regions.
FrameLabeling regions_to_frames(const std::vector<Region>& regions, double duration,
                                double frame_seconds = 0.02);

FrameMetrics frame_metrics(const FrameLabeling& predicted, const FrameLabeling& truth);

BoundarySet regions_to_boundaries(const std::vector<Region>& regions, double granularity = 1.0);

/// Result of aligning two boundary sets: exact matches and near misses are
/// pairs, everything else is a full miss.
struct BoundaryAlignment {
    std::vector<std::pair<int, int>> pairs;
    std::size_t full_misses = 0;
    /// Sum of |a - b| over pairs, in granularity units.
    long transposition_distance = 0;

    double cost(int near_miss_window) const;
    double similarity(int near_miss_window) const;
};

/// Minimum-cost alignment: pairs only boundaries closer than the window,
/// each pair costs distance / window, each unpaired boundary costs 1. Among
/// equal-cost alignments the one with fewer pairs is chosen.
BoundaryAlignment align_boundaries(const BoundarySet& a, const BoundarySet& b, int near_miss_window = 5);

/// 1 - cost / (pairs + full misses); two empty sets are identical.
double boundary_similarity(const BoundarySet& a, const BoundarySet& b, int near_miss_window = 5);

std::vector<Region> random_baseline(const std::vector<Region>& truth, double duration, std::uint64_t seed);
std::vector<Region> uniform_baseline(const std::vector<Region>& truth, double duration);

struct EvalEntry {
    std::string name;
    std::vector<Region> predicted;
    std::vector<Region> truth;
    double duration = 0.0;
};

struct EvalSettings {
    double frame_seconds = 0.02;
    double granularity = 1.0;
    int near_miss_window = 5;
    std::uint64_t seed = 0;
};

struct MetricSet {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double boundary_similarity = 0.0;
};

MetricSet evaluate_entry(const std::vector<Region>& predicted, const std::vector<Region>& truth,
                         double duration, const EvalSettings& settings = {});

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

struct ConditionSummary {
    MeanSd precision;
    MeanSd recall;
    MeanSd f1;
    MeanSd boundary_similarity;
};

inline constexpr const char* kConditionAlgorithm = "algorithm";
inline constexpr const char* kConditionRandom = "random";
inline constexpr const char* kConditionUniform = "uniform";

struct EvalReport {
    std::vector<std::string> entry_names;
    /// condition -> per-entry metrics, in entry order.
    std::map<std::string, std::vector<MetricSet>> per_entry;
    std::map<std::string, ConditionSummary> summary;
};

/// Population mean and standard deviation.
MeanSd mean_sd(const std::vector<double>& values);

/// Scores the algorithm and both baselines on every entry. Entry k uses
/// seed + k for its random baseline. Throws InvalidArgument on an empty corpus.
EvalReport evaluate_corpus(const std::vector<EvalEntry>& entries, const EvalSettings& settings = {});

/// Aligned text table with one column per condition.
std::string format_eval_table(const EvalReport& report);

} // namespace lessonlab
