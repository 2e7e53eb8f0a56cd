#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lessonlab {

/// Rate every pipeline resamples to on ingest. 441 samples per 0.02 s window.
inline constexpr double kCanonicalRate = 22050.0;
inline constexpr double kAnalysisWindowSeconds = 0.02;

/// Mono sample stream. Samples are kept in [-1, 1]; channel_count only
/// records what the source had before mixdown.
class AudioBuffer {
public:
    AudioBuffer() = default;
    AudioBuffer(std::vector<float> samples, double sample_rate, int channel_count = 1);

    std::span<const float> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    double sample_rate() const noexcept { return sample_rate_; }
    int channel_count() const noexcept { return channel_count_; }
    double duration() const noexcept {
        return static_cast<double>(samples_.size()) / sample_rate_;
    }

    /// Copy of [begin, end) in sample indices, clamped to the buffer.
    AudioBuffer slice(std::size_t begin, std::size_t end) const;
    /// Copy of the interval [start, end) in seconds; indices are rounded.
    AudioBuffer slice_seconds(double start, double end) const;

    friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

private:
    std::vector<float> samples_;
    double sample_rate_ = kCanonicalRate;
    int channel_count_ = 1;
};

struct WindowSpec {
    double window_seconds = kAnalysisWindowSeconds;
    std::size_t window_samples = 441;

    /// window_samples = round(seconds * rate).
    static WindowSpec from_seconds(double seconds, double sample_rate);
    static WindowSpec canonical() { return from_seconds(kAnalysisWindowSeconds, kCanonicalRate); }
};

/// A view into an AudioBuffer; valid only while the buffer lives.
struct SampleWindow {
    std::size_t index = 0;
    std::span<const float> samples;
    bool partial = false;
};

enum class WavSampleFormat { Pcm16, Float32 };

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf,
                                     WavSampleFormat format = WavSampleFormat::Pcm16);

AudioBuffer read_wav_file(const std::filesystem::path& path);
void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buf,
                    WavSampleFormat format = WavSampleFormat::Pcm16);

/// Linear-interpolation resampler.
AudioBuffer resample(const AudioBuffer& buf, double target_rate);

/// Scales so that the peak magnitude becomes 1. Silent input is returned as is.
AudioBuffer normalize_peak(const AudioBuffer& buf);

/// Non-overlapping windows; a shorter tail window is kept and marked partial.
std::vector<SampleWindow> windows(const AudioBuffer& buf, const WindowSpec& spec);

/// Decode + resample to the canonical rate.
AudioBuffer load_canonical(const std::filesystem::path& path);
AudioBuffer to_canonical(const AudioBuffer& buf);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

} // namespace lessonlab
