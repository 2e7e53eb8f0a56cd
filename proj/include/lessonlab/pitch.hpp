#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "lessonlab/audio.hpp"

namespace lessonlab {

struct PitchFrame {
    double time = 0.0;             ///< frame center, seconds
    std::optional<double> f0;      ///< Hz; empty when unvoiced
    double confidence = 0.0;       ///< [0, 1]

    bool voiced() const { return f0.has_value(); }
};

struct PitchContour {
    std::vector<PitchFrame> frames;
    double frame_seconds = 0.1;
};

struct PitchConfig {
    double frame_seconds = 0.1;
    std::size_t window_samples = 2048;
    double yin_threshold = 0.15;
    double f_min = 60.0;
    double f_max = 1400.0;
    /// Frames quieter than this (window RMS) are emitted unvoiced.
    double silence_rms = 1e-4;
    double min_confidence = 0.70;
    /// Frames whose two window halves disagree by more than this many
    /// semitones are emitted unvoiced; 0 disables the check.
    double stability_semitones = 0.5;
};

/// Interface for anything that turns audio into a per-frame f0/confidence
/// series on a fixed hop. A neural tracker can be dropped in here.
class PitchEstimator {
public:
    virtual ~PitchEstimator() = default;
    virtual PitchContour estimate(const AudioBuffer& buf) const = 0;
};

/// Cumulative-mean-normalized difference estimator (YIN family).
class YinEstimator final : public PitchEstimator {
public:
    explicit YinEstimator(PitchConfig config = {});
    PitchContour estimate(const AudioBuffer& buf) const override;

    const PitchConfig& config() const { return config_; }

private:
    PitchConfig config_;
};

PitchContour estimate_contour(const AudioBuffer& buf, double f_min = 60.0, double f_max = 1400.0);

/// Frames with confidence strictly below the threshold lose their f0.
PitchContour filter_confident(const PitchContour& contour, double min_confidence = 0.70);

/// Frame times used by the estimator: k * frame_seconds for every hop that
/// starts inside the buffer.
std::size_t contour_frame_count(std::size_t sample_count, double sample_rate, double frame_seconds);

} // namespace lessonlab
