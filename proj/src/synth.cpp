#include "lessonlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lessonlab/error.hpp"
#include "lessonlab/files.hpp"
#include "lessonlab/json_io.hpp"

namespace lessonlab {

namespace fs = std::filesystem;

double midi_to_freq(double midi) {
    return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0);
}

AudioBuffer sine(double freq, double seconds, double rate, double amplitude) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate));
    }
    return AudioBuffer(std::move(out), rate);
}

std::vector<float> tone_phrase(const std::vector<ToneNote>& notes, double rate, double amplitude,
                               double attack_seconds, double release_seconds) {
    std::vector<float> out;
    double phase = 0.0;
    for (const auto& note : notes) {
        const auto n = static_cast<std::size_t>(std::llround(note.seconds * rate));
        const double step = 2.0 * std::numbers::pi * midi_to_freq(note.midi) / rate;
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(static_cast<float>(amplitude * std::sin(phase)));
            phase = std::fmod(phase + step, 2.0 * std::numbers::pi);
        }
    }
    const auto attack = std::min(out.size(), static_cast<std::size_t>(attack_seconds * rate));
    const auto release = std::min(out.size(), static_cast<std::size_t>(release_seconds * rate));
    for (std::size_t i = 0; i < attack; ++i) out[i] *= static_cast<float>(i) / static_cast<float>(attack);
    for (std::size_t i = 0; i < release; ++i) {
        out[out.size() - 1 - i] *= static_cast<float>(i) / static_cast<float>(release);
    }
    return out;
}

namespace {

/// RBJ constant-peak band-pass biquad.
class BandPass {
public:
    BandPass(double center, double q, double rate) {
        const double w = 2.0 * std::numbers::pi * center / rate;
        const double alpha = std::sin(w) / (2.0 * q);
        const double a0 = 1.0 + alpha;
        b0_ = alpha / a0;
        b2_ = -alpha / a0;
        a1_ = -2.0 * std::cos(w) / a0;
        a2_ = (1.0 - alpha) / a0;
    }

    double operator()(double x) {
        const double y = b0_ * x + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
        x2_ = x1_;
        x1_ = x;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    double b0_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
    double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

} // namespace

std::vector<float> speech_noise(double seconds, double rate, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> white(0.0, 1.0);
    std::uniform_real_distribution<double> syllable_rate(3.0, 5.0);
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    BandPass low(700.0, 0.8, rate);
    BandPass high(2200.0, 0.8, rate);
    const double mod_hz = syllable_rate(rng);
    std::vector<double> raw(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = white(rng);
        const double band = low(x) + 0.6 * high(x);
        const double t = static_cast<double>(i) / rate;
        const double envelope = 0.65 + 0.35 * std::sin(2.0 * std::numbers::pi * mod_hz * t);
        raw[i] = band * envelope;
        peak = std::max(peak, std::abs(raw[i]));
    }
    std::vector<float> out(n);
    const double scale = peak > 0.0 ? amplitude / peak : 0.0;
    const auto fade = std::min(n / 2, static_cast<std::size_t>(0.01 * rate));
    for (std::size_t i = 0; i < n; ++i) {
        double g = scale;
        if (i < fade) g *= static_cast<double>(i) / static_cast<double>(fade);
        if (n - 1 - i < fade) g *= static_cast<double>(n - 1 - i) / static_cast<double>(fade);
        out[i] = static_cast<float>(raw[i] * g);
    }
    return out;
}

std::vector<Region> SyntheticLesson::instrument_truth() const {
    std::vector<Region> out;
    for (const auto& p : phrases) out.push_back(p.region);
    return out;
}

AudioBuffer SyntheticLesson::mix() const {
    const auto a = stems.voice.samples();
    const auto b = stems.instrument.samples();
    std::vector<float> out(std::max(a.size(), b.size()), 0.0f);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return AudioBuffer(std::move(out), stems.instrument.sample_rate());
}

SyntheticLesson make_synthetic_lesson(const SynthOptions& o) {
    if (!(o.duration > 0.0) || !(o.rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "synthetic lesson needs positive duration and rate");
    }
    std::mt19937_64 rng(o.seed);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    // Scale degrees of two octaves of C major from C4.
    static const int kScale[] = {60, 62, 64, 65, 67, 69, 71, 72, 74, 76, 77, 79, 81, 83, 84};

    const auto total = static_cast<std::size_t>(std::llround(o.duration * o.rate));
    std::normal_distribution<double> floor_noise(0.0, o.noise_floor);
    std::vector<float> voice(total), instrument(total);
    for (auto& v : voice) v = static_cast<float>(floor_noise(rng));
    for (auto& v : instrument) v = static_cast<float>(floor_noise(rng));

    auto place = [&](std::vector<float>& track, double start, const std::vector<float>& signal) {
        const auto offset = static_cast<std::size_t>(std::llround(start * o.rate));
        for (std::size_t i = 0; i < signal.size() && offset + i < track.size(); ++i) track[offset + i] += signal[i];
    };
    auto seconds_of = [&](std::size_t samples) { return static_cast<double>(samples) / o.rate; };

    SyntheticLesson lesson;
    double t = 0.0;
    std::size_t voice_index = 0;
    std::size_t phrase_index = 0;
    while (true) {
        const double speech = uniform(o.speech_min, o.speech_max);
        if (t + speech > o.duration) break;
        place(voice, t, speech_noise(speech, o.rate, o.amplitude, rng()));
        lesson.voice_truth.push_back(
            Region{"voice-truth-" + std::to_string(voice_index++), t, t + speech, Track::Voice});
        t += speech + uniform(o.pause_min, o.pause_max);

        std::vector<ToneNote> notes;
        const double phrase_target = uniform(o.phrase_min, o.phrase_max);
        double length = 0.0;
        while (length < phrase_target) {
            ToneNote note{kScale[std::uniform_int_distribution<std::size_t>(0, std::size(kScale) - 1)(rng)],
                          uniform(o.note_min, o.note_max)};
            if (!notes.empty() && note.midi == notes.back().midi) continue;
            notes.push_back(note);
            length += note.seconds;
        }
        const auto samples = tone_phrase(notes, o.rate, o.amplitude);
        const double start = seconds_of(static_cast<std::size_t>(std::llround(t * o.rate)));
        const double end = start + seconds_of(samples.size());
        if (end > o.duration) break;
        place(instrument, start, samples);
        lesson.phrases.push_back(
            PhraseTruth{Region{"phrase-" + std::to_string(phrase_index++), start, end, Track::Instrument}, notes});
        t = end + uniform(o.pause_min, o.pause_max);
    }
    lesson.stems = make_stem_pair(AudioBuffer(std::move(voice), o.rate), AudioBuffer(std::move(instrument), o.rate));
    return lesson;
}

void write_synthetic_lesson(const fs::path& dir, const SyntheticLesson& lesson) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    write_wav_file(dir / "voice.wav", lesson.stems.voice, WavSampleFormat::Float32);
    write_wav_file(dir / "instrument.wav", lesson.stems.instrument, WavSampleFormat::Float32);
    write_wav_file(dir / "mix.wav", lesson.mix(), WavSampleFormat::Float32);
    write_file_atomic(dir / "truth.json", regions_to_label_json(lesson.instrument_truth()).dump(2));
}

void write_synthetic_corpus(const fs::path& dir, std::size_t count, std::uint64_t seed) {
    for (std::size_t k = 0; k < count; ++k) {
        SynthOptions o;
        o.seed = seed + k;
        o.duration = 60.0 + 30.0 * static_cast<double>(k % 4);
        char name[32];
        std::snprintf(name, sizeof name, "lesson-%02zu", k);
        write_synthetic_lesson(dir / name, make_synthetic_lesson(o));
    }
}

} // namespace lessonlab
