#include "lessonlab/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "lessonlab/error.hpp"

namespace lessonlab {

namespace {

// Time comparisons are done on window-count products, which are not exact
// in binary floating point (100 * 0.02 != 2.0).
constexpr double kTimeEps = 1e-9;

std::size_t reflect_index(std::ptrdiff_t j, std::size_t n) {
    const auto size = static_cast<std::ptrdiff_t>(n);
    while (j < 0 || j >= size) {
        if (j < 0) j = -j - 1;
        if (j >= size) j = 2 * size - j - 1;
    }
    return static_cast<std::size_t>(j);
}

} // namespace

EnergyProfile compute_rms(const AudioBuffer& buf, const WindowSpec& spec) {
    EnergyProfile profile;
    profile.window_seconds = spec.window_seconds;
    for (const auto& w : windows(buf, spec)) {
        double acc = 0.0;
        for (float x : w.samples) acc += static_cast<double>(x) * x;
        profile.rms.push_back(std::sqrt(acc / static_cast<double>(w.samples.size())));
    }
    return profile;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) return {1.0};
    const auto radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (auto& v : k) v /= total;
    return k;
}

ThresholdHistogram threshold_histogram(const EnergyProfile& profile, int bins, double smoothing_sigma) {
    if (profile.rms.empty()) {
        throw Error(ErrorCode::InvalidArgument, "energy profile is empty");
    }
    if (bins < 8) {
        throw Error(ErrorCode::InvalidArgument, "histogram needs at least 8 bins");
    }
    const auto [lo_it, hi_it] = std::minmax_element(profile.rms.begin(), profile.rms.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (lo == hi) {
        throw Error(ErrorCode::DegenerateProfile, "all window energies are identical");
    }

    const auto n = static_cast<std::size_t>(bins);
    ThresholdHistogram h;
    h.bin_width = hi / bins;
    h.counts.assign(n, 0.0);
    for (double v : profile.rms) {
        auto b = static_cast<std::size_t>(std::floor(v / hi * bins));
        h.counts[std::min(b, n - 1)] += 1.0;
    }

    const auto kernel = gaussian_kernel(smoothing_sigma);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    h.smoothed.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            acc += kernel[static_cast<std::size_t>(k + radius)] *
                   h.counts[reflect_index(static_cast<std::ptrdiff_t>(i) + k, n)];
        }
        h.smoothed[i] = acc;
    }

    h.second_difference.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        h.second_difference[i] = h.smoothed[i - 1] - 2.0 * h.smoothed[i] + h.smoothed[i + 1];
    }
    return h;
}

// The threshold sits at the bottom of the valley that separates the
// dominant mode of the smoothed histogram from its most prominent rival.
// That bottom is the interior point where the histogram turns from falling
// to rising (non-negative second difference); across an empty stretch the
// lowest such bin wins.
double adaptive_threshold(const EnergyProfile& profile, int bins, double smoothing_sigma) {
    const auto h = threshold_histogram(profile, bins, smoothing_sigma);
    const auto& s = h.smoothed;
    const std::size_t n = s.size();

    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < n; ++i) {
        const bool rises = i == 0 || s[i] > s[i - 1];
        const bool holds = i + 1 == n || s[i] >= s[i + 1];
        if (rises && holds && s[i] > 0.0) peaks.push_back(i);
    }
    if (peaks.size() < 2) {
        throw Error(ErrorCode::DegenerateProfile, "energy histogram has a single mode");
    }

    const std::size_t dominant =
        *std::max_element(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

    auto valley_between = [&](std::size_t a, std::size_t b) {
        const std::size_t lo = std::min(a, b);
        const std::size_t hi = std::max(a, b);
        std::size_t best = lo + 1;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            if (s[i] < s[best]) best = i;
        }
        return best;
    };

    std::optional<std::size_t> rival;
    double best_depth = 0.0;
    for (std::size_t p : peaks) {
        if (p == dominant || (p > dominant ? p - dominant : dominant - p) < 2) continue;
        const double depth = s[p] - s[valley_between(p, dominant)];
        if (depth > best_depth) {
            best_depth = depth;
            rival = p;
        }
    }
    if (!rival) {
        throw Error(ErrorCode::DegenerateProfile, "energy histogram has no separating valley");
    }
    return h.bin_center(valley_between(*rival, dominant));
}

SilenceLabels label_silence(const EnergyProfile& profile, double threshold) {
    if (threshold < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "threshold must be non-negative");
    }
    SilenceLabels out;
    out.threshold = threshold;
    out.labels.reserve(profile.rms.size());
    for (double v : profile.rms) out.labels.push_back(v >= threshold);
    return out;
}

std::vector<Region> group_regions(const SilenceLabels& labels, double window_seconds,
                                  const GroupingOptions& options) {
    if (!(options.gap_threshold > 0.0) || options.min_duration < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "gap threshold must be positive, min duration non-negative");
    }

    struct Run {
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Run> runs;
    const auto& l = labels.labels;
    for (std::size_t i = 0; i < l.size();) {
        if (!l[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < l.size() && l[j]) ++j;
        const auto gap = runs.empty() ? 0.0 : static_cast<double>(i - runs.back().end) * window_seconds;
        if (!runs.empty() && gap <= options.gap_threshold + kTimeEps) {
            runs.back().end = j;
        } else {
            runs.push_back({i, j});
        }
        i = j;
    }

    std::vector<Region> out;
    for (const auto& r : runs) {
        const double start = static_cast<double>(r.begin) * window_seconds;
        double end = static_cast<double>(r.end) * window_seconds;
        if (options.total_duration) end = std::min(end, *options.total_duration);
        if (end - start < options.min_duration - kTimeEps || end <= start) continue;
        Region region;
        region.id = options.id_prefix + std::to_string(out.size());
        region.start = start;
        region.end = end;
        region.track = options.track;
        region.source = RegionSource::Auto;
        region.state = LearnState::ToLearn;
        out.push_back(std::move(region));
    }
    return out;
}

StemSegmentation segment_stem(const AudioBuffer& stem, Track track, const SegmentationConfig& config) {
    StemSegmentation out;
    const auto normalized = normalize_peak(stem);
    const auto spec = WindowSpec::from_seconds(config.window_seconds, normalized.sample_rate());
    out.profile = compute_rms(normalized, spec);
    if (out.profile.rms.empty()) {
        out.labels.threshold = 0.0;
        return out;
    }

    const double peak = *std::max_element(out.profile.rms.begin(), out.profile.rms.end());
    if (peak == 0.0) {
        // Digital silence: no window can be non-silent, whatever the threshold.
        out.threshold_fallback = true;
        out.labels.labels.assign(out.profile.rms.size(), false);
        return out;
    }

    try {
        out.threshold = adaptive_threshold(out.profile, config.histogram_bins, config.smoothing_sigma);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateProfile) throw;
        out.threshold = config.fallback_ratio * peak;
        out.threshold_fallback = true;
    }
    out.labels = label_silence(out.profile, out.threshold);

    GroupingOptions grouping;
    grouping.gap_threshold = config.gap_threshold;
    grouping.min_duration = config.min_duration;
    grouping.track = track;
    grouping.total_duration = normalized.duration();
    grouping.id_prefix = std::string(to_string(track)) + "-";
    out.regions = group_regions(out.labels, spec.window_seconds, grouping);
    return out;
}

LessonSegmentation segment_lesson(const StemPair& stems, const SegmentationConfig& config) {
    return LessonSegmentation{segment_stem(stems.voice, Track::Voice, config),
                              segment_stem(stems.instrument, Track::Instrument, config)};
}

} // namespace lessonlab
