#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lessonlab/audio.hpp"
#include "lessonlab/region.hpp"
#include "lessonlab/separation.hpp"

namespace lessonlab {

double midi_to_freq(double midi);

AudioBuffer sine(double freq, double seconds, double rate = kCanonicalRate, double amplitude = 0.5);

struct ToneNote {
    int midi = 69;
    double seconds = 0.5;
};

/// Continuous-phase tone through the notes with linear attack and release
/// at the phrase edges.
std::vector<float> tone_phrase(const std::vector<ToneNote>& notes, double rate, double amplitude,
                               double attack_seconds = 0.01, double release_seconds = 0.02);

/// White noise band-limited to roughly 300-3400 Hz with a slow syllabic
/// amplitude modulation. Peak amplitude is about `amplitude`.
std::vector<float> speech_noise(double seconds, double rate, double amplitude, std::uint64_t seed);

struct SynthOptions {
    double duration = 120.0;
    std::uint64_t seed = 1;
    double rate = kCanonicalRate;
    double noise_floor = 1e-3;
    double speech_min = 3.0;
    double speech_max = 8.0;
    double pause_min = 0.2;
    double pause_max = 0.8;
    double phrase_min = 2.0;
    double phrase_max = 6.0;
    double note_min = 0.3;
    double note_max = 0.8;
    double amplitude = 0.5;
};

struct PhraseTruth {
    Region region;
    std::vector<ToneNote> notes;
};

/// Alternating speech on the voice stem and tone phrases on the instrument
/// stem. Phrase extents are the instrument ground truth.
struct SyntheticLesson {
    StemPair stems;
    std::vector<PhraseTruth> phrases;
    std::vector<Region> voice_truth;

    std::vector<Region> instrument_truth() const;
    AudioBuffer mix() const;
};

SyntheticLesson make_synthetic_lesson(const SynthOptions& options);

/// voice.wav, instrument.wav, mix.wav and truth.json (instrument phrases).
void write_synthetic_lesson(const std::filesystem::path& dir, const SyntheticLesson& lesson);

/// `count` lessons in dir/lesson-NN, lesson k with seed + k and a duration
/// cycling through 60..150 s.
void write_synthetic_corpus(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed);

} // namespace lessonlab
