#include "lessonlab/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "lessonlab/error.hpp"

namespace lessonlab {

std::size_t contour_frame_count(std::size_t sample_count, double sample_rate, double frame_seconds) {
    const auto hop = static_cast<std::size_t>(std::llround(frame_seconds * sample_rate));
    if (hop == 0) throw Error(ErrorCode::InvalidArgument, "frame hop shorter than one sample");
    return (sample_count + hop - 1) / hop;
}

YinEstimator::YinEstimator(PitchConfig config) : config_(config) {
    if (!(config_.f_min < config_.f_max)) {
        throw Error(ErrorCode::InvalidArgument, "f_min must be below f_max");
    }
    if (!(config_.f_min > 0.0) || !(config_.frame_seconds > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "f_min and frame hop must be positive");
    }
}

namespace {

struct LagRange {
    std::size_t min;
    std::size_t max;
    std::size_t integration;
};

LagRange lag_range(const PitchConfig& c, double sample_rate, std::size_t window_samples) {
    if (!(c.f_max < sample_rate / 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "f_max must be below the Nyquist frequency");
    }
    LagRange r;
    r.min = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(sample_rate / c.f_max)));
    r.max = static_cast<std::size_t>(std::floor(sample_rate / c.f_min));
    // d(tau) is needed up to max + 1 for interpolation at the edge.
    if (r.max + 2 >= window_samples || r.min > r.max) {
        throw Error(ErrorCode::InvalidArgument, "analysis window too short for the f0 search range");
    }
    r.integration = window_samples - r.max - 1;
    return r;
}

// One analysis frame: returns (f0, confidence) or nullopt when unvoiced.
std::optional<std::pair<double, double>> analyze_frame(const float* x, const LagRange& lags,
                                                       double sample_rate, double threshold,
                                                       std::vector<double>& diff,
                                                       std::vector<double>& cmnd) {
    const std::size_t last = lags.max + 1;
    diff.assign(last + 1, 0.0);
    for (std::size_t tau = 1; tau <= last; ++tau) {
        double acc = 0.0;
        const float* a = x;
        const float* b = x + tau;
        for (std::size_t j = 0; j < lags.integration; ++j) {
            const double d = static_cast<double>(a[j]) - b[j];
            acc += d * d;
        }
        diff[tau] = acc;
    }

    cmnd.assign(last + 1, 1.0);
    double running = 0.0;
    for (std::size_t tau = 1; tau <= last; ++tau) {
        running += diff[tau];
        cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::optional<std::size_t> chosen;
    for (std::size_t tau = lags.min; tau <= lags.max; ++tau) {
        if (cmnd[tau] < threshold) {
            while (tau + 1 <= lags.max && cmnd[tau + 1] < cmnd[tau]) ++tau;
            chosen = tau;
            break;
        }
    }
    if (!chosen) {
        std::size_t best = lags.min;
        for (std::size_t tau = lags.min + 1; tau <= lags.max; ++tau) {
            if (cmnd[tau] < cmnd[best]) best = tau;
        }
        chosen = best;
    }

    // Parabolic refinement on the raw difference function.
    const std::size_t tau = *chosen;
    const double s0 = diff[tau - 1];
    const double s1 = diff[tau];
    const double s2 = diff[tau + 1];
    const double denom = s0 - 2.0 * s1 + s2;
    double refined = static_cast<double>(tau);
    if (denom > 0.0) {
        refined += std::clamp(0.5 * (s0 - s2) / denom, -1.0, 1.0);
    }
    refined = std::clamp(refined, static_cast<double>(lags.min), static_cast<double>(lags.max));

    const double confidence = std::clamp(1.0 - cmnd[tau], 0.0, 1.0);
    return std::make_pair(sample_rate / refined, confidence);
}

double rms_of(const float* x, std::size_t n) {
    double energy = 0.0;
    for (std::size_t j = 0; j < n; ++j) energy += static_cast<double>(x[j]) * x[j];
    return n > 0 ? std::sqrt(energy / static_cast<double>(n)) : 0.0;
}

/// False when the two window halves disagree on pitch by more than the
/// configured tolerance, which happens on frames straddling a note change.
bool stable(const PitchConfig& config, const float* window, std::size_t half_len, const LagRange& half_lags,
            double sample_rate, std::vector<double>& diff, std::vector<double>& cmnd) {
    const float* halves[] = {window, window + half_len};
    double f0[2];
    for (int h = 0; h < 2; ++h) {
        // A silent half (onset or release) carries no competing pitch.
        if (rms_of(halves[h], half_len) < config.silence_rms) return true;
        const auto est = analyze_frame(halves[h], half_lags, sample_rate, config.yin_threshold, diff, cmnd);
        if (!est) return true;
        f0[h] = est->first;
    }
    return std::abs(12.0 * std::log2(f0[0] / f0[1])) <= config.stability_semitones;
}

} // namespace

PitchContour YinEstimator::estimate(const AudioBuffer& buf) const {
    const double sr = buf.sample_rate();
    const auto lags = lag_range(config_, sr, config_.window_samples);
    const std::size_t half_len = config_.window_samples / 2;
    const bool gate = config_.stability_semitones > 0.0;
    const auto half_lags = gate ? lag_range(config_, sr, half_len) : lags;
    const auto hop = static_cast<std::size_t>(std::llround(config_.frame_seconds * sr));
    const std::size_t n_frames = contour_frame_count(buf.size(), sr, config_.frame_seconds);
    const auto samples = buf.samples();
    const auto half = static_cast<std::ptrdiff_t>(config_.window_samples / 2);

    PitchContour contour;
    contour.frame_seconds = config_.frame_seconds;
    contour.frames.reserve(n_frames);

    std::vector<float> window(config_.window_samples);
    std::vector<double> diff;
    std::vector<double> cmnd;
    for (std::size_t k = 0; k < n_frames; ++k) {
        const auto center = static_cast<std::ptrdiff_t>(k * hop);
        for (std::size_t j = 0; j < window.size(); ++j) {
            const std::ptrdiff_t idx = center - half + static_cast<std::ptrdiff_t>(j);
            window[j] = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(samples.size()))
                            ? samples[static_cast<std::size_t>(idx)]
                            : 0.0f;
        }

        PitchFrame frame;
        frame.time = static_cast<double>(k * hop) / sr;
        if (rms_of(window.data(), window.size()) >= config_.silence_rms) {
            if (auto est = analyze_frame(window.data(), lags, sr, config_.yin_threshold, diff, cmnd)) {
                frame.f0 = est->first;
                frame.confidence = est->second;
            }
        }
        if (frame.f0 && gate && !stable(config_, window.data(), half_len, half_lags, sr, diff, cmnd)) {
            frame.f0.reset();
            frame.confidence = 0.0;
        }
        contour.frames.push_back(frame);
    }
    return contour;
}

PitchContour estimate_contour(const AudioBuffer& buf, double f_min, double f_max) {
    PitchConfig config;
    config.f_min = f_min;
    config.f_max = f_max;
    return YinEstimator(config).estimate(buf);
}

PitchContour filter_confident(const PitchContour& contour, double min_confidence) {
    if (min_confidence < 0.0 || min_confidence > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "confidence threshold must lie in [0, 1]");
    }
    PitchContour out = contour;
    for (auto& f : out.frames) {
        if (f.confidence < min_confidence) f.f0.reset();
    }
    return out;
}

} // namespace lessonlab
