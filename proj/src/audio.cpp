#include "lessonlab/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "lessonlab/error.hpp"

namespace lessonlab {

// ---------------------------------------------------------------------------
// AudioBuffer
// ---------------------------------------------------------------------------

AudioBuffer::AudioBuffer(std::vector<float> samples, double sample_rate, int channel_count)
    : samples_(std::move(samples)), sample_rate_(sample_rate), channel_count_(channel_count) {
    if (!(sample_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
    }
    if (channel_count < 1) {
        throw Error(ErrorCode::InvalidArgument, "channel count must be at least 1");
    }
    for (auto& s : samples_) {
        if (std::isnan(s)) s = 0.0f;
        s = std::clamp(s, -1.0f, 1.0f);
    }
}

AudioBuffer AudioBuffer::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, samples_.size());
    begin = std::min(begin, end);
    return AudioBuffer(std::vector<float>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                          samples_.begin() + static_cast<std::ptrdiff_t>(end)),
                       sample_rate_, channel_count_);
}

AudioBuffer AudioBuffer::slice_seconds(double start, double end) const {
    const auto to_index = [&](double t) {
        return static_cast<std::size_t>(std::max(0.0, std::round(t * sample_rate_)));
    };
    return slice(to_index(start), to_index(end));
}

WindowSpec WindowSpec::from_seconds(double seconds, double sample_rate) {
    if (!(seconds > 0.0) || !(sample_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "window length and sample rate must be positive");
    }
    const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
    if (n < 1) {
        throw Error(ErrorCode::InvalidArgument, "window shorter than one sample");
    }
    return WindowSpec{seconds, n};
}

// ---------------------------------------------------------------------------
// WAV decoding
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) |
           (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
    return std::memcmp(b.data() + at, tag, 4) == 0;
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FmtChunk& fmt) {
    if (fmt.format == kFormatFloat) {
        if (fmt.bits == 32) {
            std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                (static_cast<std::uint32_t>(p[2]) << 16) |
                                (static_cast<std::uint32_t>(p[3]) << 24);
            float f;
            std::memcpy(&f, &raw, sizeof f);
            return f;
        }
        std::uint64_t raw = 0;
        for (int i = 7; i >= 0; --i) raw = (raw << 8) | p[i];
        double d;
        std::memcpy(&d, &raw, sizeof d);
        return d;
    }
    switch (fmt.bits) {
        case 8:
            return (static_cast<int>(p[0]) - 128) / 128.0;
        case 16: {
            auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            return v / 32768.0;
        }
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF;
            return v / 8388608.0;
        }
        default: {
            auto v = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) |
                                               (static_cast<std::uint32_t>(p[1]) << 8) |
                                               (static_cast<std::uint32_t>(p[2]) << 16) |
                                               (static_cast<std::uint32_t>(p[3]) << 24));
            return v / 2147483648.0;
        }
    }
}

} // namespace

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
        throw Error(ErrorCode::Format, "not a RIFF/WAVE stream");
    }

    std::optional<FmtChunk> fmt;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
        const std::size_t body = pos + 8;
        // Tolerate a truncated final data chunk; writers that stream often
        // leave the size field unpatched.
        const std::size_t available = std::min<std::size_t>(chunk_size, bytes.size() - body);
        if (tag_is(bytes, pos, "fmt ")) {
            if (available < 16) throw Error(ErrorCode::Format, "fmt chunk too short");
            FmtChunk f;
            f.format = read_u16(bytes, body);
            f.channels = read_u16(bytes, body + 2);
            f.sample_rate = read_u32(bytes, body + 4);
            f.block_align = read_u16(bytes, body + 12);
            f.bits = read_u16(bytes, body + 14);
            if (f.format == kFormatExtensible) {
                if (available < 26) throw Error(ErrorCode::Format, "extensible fmt chunk too short");
                f.format = read_u16(bytes, body + 24);
            }
            fmt = f;
        } else if (tag_is(bytes, pos, "data")) {
            data = bytes.subspan(body, available);
            have_data = true;
        }
        pos = body + chunk_size + (chunk_size & 1u);
    }

    if (!fmt) throw Error(ErrorCode::Format, "missing fmt chunk");
    if (!have_data) throw Error(ErrorCode::Format, "missing data chunk");
    if (fmt->format != kFormatPcm && fmt->format != kFormatFloat) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "unsupported WAV codec " + std::to_string(fmt->format));
    }
    const bool bits_ok = fmt->format == kFormatPcm
                             ? (fmt->bits == 8 || fmt->bits == 16 || fmt->bits == 24 || fmt->bits == 32)
                             : (fmt->bits == 32 || fmt->bits == 64);
    if (!bits_ok) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "unsupported bit depth " + std::to_string(fmt->bits));
    }
    if (fmt->channels < 1 || fmt->channels > 2) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "unsupported channel count " + std::to_string(fmt->channels));
    }
    if (fmt->sample_rate == 0) throw Error(ErrorCode::Format, "zero sample rate");

    const std::size_t bytes_per_sample = fmt->bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
    if (fmt->block_align != 0 && fmt->block_align != frame_bytes) {
        throw Error(ErrorCode::Format, "block alignment does not match channel layout");
    }
    const std::size_t frames = data.size() / frame_bytes;
    if (frames == 0) throw Error(ErrorCode::EmptyInput, "WAV contains no samples");

    std::vector<float> mono(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt->channels; ++c) {
            acc += decode_sample(data.data() + i * frame_bytes + c * bytes_per_sample, *fmt);
        }
        mono[i] = static_cast<float>(acc / fmt->channels);
    }
    return AudioBuffer(std::move(mono), static_cast<double>(fmt->sample_rate), fmt->channels);
}

// ---------------------------------------------------------------------------
// WAV encoding
// ---------------------------------------------------------------------------

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

} // namespace

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf, WavSampleFormat format) {
    const std::uint16_t bits = format == WavSampleFormat::Pcm16 ? 16 : 32;
    const std::uint16_t tag = format == WavSampleFormat::Pcm16 ? kFormatPcm : kFormatFloat;
    const auto rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate()));
    const auto data_bytes = static_cast<std::uint32_t>(buf.size() * (bits / 8));

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, tag);
    put_u16(out, 1);
    put_u32(out, rate);
    put_u32(out, rate * (bits / 8));
    put_u16(out, bits / 8);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, data_bytes);

    for (float s : buf.samples()) {
        if (format == WavSampleFormat::Pcm16) {
            const long q = std::clamp(std::lround(static_cast<double>(s) * 32768.0), -32768L, 32767L);
            put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
        } else {
            std::uint32_t raw;
            std::memcpy(&raw, &s, sizeof raw);
            put_u32(out, raw);
        }
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

AudioBuffer read_wav_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_wav(bytes);
}

void write_wav_file(const std::filesystem::path& path, const AudioBuffer& buf,
                    WavSampleFormat format) {
    const auto bytes = encode_wav(buf, format);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Resampling, normalization, windowing
// ---------------------------------------------------------------------------

AudioBuffer resample(const AudioBuffer& buf, double target_rate) {
    if (!(target_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "target rate must be positive");
    }
    if (target_rate == buf.sample_rate()) return buf;

    const auto in = buf.samples();
    const double ratio = buf.sample_rate() / target_rate;
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(in.size()) * target_rate / buf.sample_rate()));
    std::vector<float> out(n_out);
    if (in.empty()) return AudioBuffer(std::move(out), target_rate, buf.channel_count());

    const std::size_t last = in.size() - 1;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        const auto k = static_cast<std::size_t>(pos);
        if (k >= last) {
            out[i] = in[last];
            continue;
        }
        const double frac = pos - static_cast<double>(k);
        out[i] = static_cast<float>((1.0 - frac) * in[k] + frac * in[k + 1]);
    }
    return AudioBuffer(std::move(out), target_rate, buf.channel_count());
}

AudioBuffer normalize_peak(const AudioBuffer& buf) {
    float peak = 0.0f;
    for (float s : buf.samples()) peak = std::max(peak, std::fabs(s));
    if (peak == 0.0f || peak == 1.0f) return buf;
    const double gain = 1.0 / peak;
    std::vector<float> out(buf.size());
    std::transform(buf.samples().begin(), buf.samples().end(), out.begin(),
                   [gain](float s) { return static_cast<float>(s * gain); });
    return AudioBuffer(std::move(out), buf.sample_rate(), buf.channel_count());
}

std::vector<SampleWindow> windows(const AudioBuffer& buf, const WindowSpec& spec) {
    if (spec.window_samples < 1) {
        throw Error(ErrorCode::InvalidArgument, "window must hold at least one sample");
    }
    std::vector<SampleWindow> out;
    const auto samples = buf.samples();
    out.reserve((samples.size() + spec.window_samples - 1) / spec.window_samples);
    for (std::size_t begin = 0, k = 0; begin < samples.size(); begin += spec.window_samples, ++k) {
        const std::size_t len = std::min(spec.window_samples, samples.size() - begin);
        out.push_back(SampleWindow{k, samples.subspan(begin, len), len < spec.window_samples});
    }
    return out;
}

AudioBuffer to_canonical(const AudioBuffer& buf) {
    return resample(buf, kCanonicalRate);
}

AudioBuffer load_canonical(const std::filesystem::path& path) {
    return to_canonical(read_wav_file(path));
}

} // namespace lessonlab
