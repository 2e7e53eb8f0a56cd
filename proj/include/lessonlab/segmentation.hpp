#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lessonlab/audio.hpp"
#include "lessonlab/region.hpp"
#include "lessonlab/separation.hpp"

namespace lessonlab {

struct EnergyProfile {
    std::vector<double> rms;
    double window_seconds = kAnalysisWindowSeconds;
};

/// labels[i] is true when window i is non-silent (rms >= threshold).
struct SilenceLabels {
    std::vector<bool> labels;
    double threshold = 0.0;
};

struct SegmentationConfig {
    double window_seconds = kAnalysisWindowSeconds;
    int histogram_bins = 100;
    double smoothing_sigma = 2.0;
    /// Threshold as a fraction of the profile peak when the histogram has no usable valley.
    double fallback_ratio = 0.05;
    double gap_threshold = 2.0;
    double min_duration = 1.0;
};

EnergyProfile compute_rms(const AudioBuffer& buf, const WindowSpec& spec);

/// Smoothed RMS histogram and its discrete second difference, exposed for
/// diagnostics and tests.
struct ThresholdHistogram {
    double bin_width = 0.0;
    std::vector<double> counts;
    std::vector<double> smoothed;
    std::vector<double> second_difference;

    double bin_center(std::size_t bin) const { return (static_cast<double>(bin) + 0.5) * bin_width; }
};

ThresholdHistogram threshold_histogram(const EnergyProfile& profile, int bins, double smoothing_sigma);

/// Discrete Gaussian kernel truncated at +-4 sigma and normalized to sum 1.
std::vector<double> gaussian_kernel(double sigma);

/// Picks the silence threshold from the histogram of window energies.
/// Throws DegenerateProfile when every value is identical or when the
/// smoothed histogram has a single mode.
double adaptive_threshold(const EnergyProfile& profile, int bins = 100, double smoothing_sigma = 2.0);

SilenceLabels label_silence(const EnergyProfile& profile, double threshold);

struct GroupingOptions {
    double gap_threshold = 2.0;
    double min_duration = 1.0;
    Track track = Track::Instrument;
    /// Region ends are clipped to this when set (the last window may be partial).
    std::optional<double> total_duration;
    std::string id_prefix;
};

/// Runs of non-silent windows, merged across gaps <= gap_threshold and then
/// filtered by min_duration.
std::vector<Region> group_regions(const SilenceLabels& labels, double window_seconds,
                                  const GroupingOptions& options);

struct StemSegmentation {
    EnergyProfile profile;
    SilenceLabels labels;
    std::vector<Region> regions;
    double threshold = 0.0;
    bool threshold_fallback = false;
};

struct LessonSegmentation {
    StemSegmentation voice;
    StemSegmentation instrument;
};

StemSegmentation segment_stem(const AudioBuffer& stem, Track track, const SegmentationConfig& config);
LessonSegmentation segment_lesson(const StemPair& stems, const SegmentationConfig& config = {});

} // namespace lessonlab
