#include "doctest.h"

#include <cmath>
#include <random>

#include "lessonlab/error.hpp"
#include "lessonlab/notes.hpp"
#include "lessonlab/pitch.hpp"
#include "lessonlab/synth.hpp"
#include "oracles.hpp"

using namespace lessonlab;

namespace {

std::vector<double> voiced_f0(const PitchContour& c) {
    std::vector<double> out;
    for (const auto& f : c.frames) {
        if (f.voiced()) out.push_back(*f.f0);
    }
    return out;
}

PitchContour contour_of(const std::vector<std::optional<double>>& midi, double hop = 0.1) {
    PitchContour c;
    c.frame_seconds = hop;
    for (std::size_t k = 0; k < midi.size(); ++k) {
        PitchFrame f;
        f.time = static_cast<double>(k) * hop;
        if (midi[k]) {
            f.f0 = 440.0 * std::pow(2.0, (*midi[k] - 69.0) / 12.0);
            f.confidence = 1.0;
        }
        c.frames.push_back(f);
    }
    return c;
}

AudioBuffer two_tones(double f1, double f2) {
    auto a = sine(f1, 1.0);
    const auto b = sine(f2, 1.0);
    std::vector<float> s(a.samples().begin(), a.samples().end());
    s.insert(s.end(), b.samples().begin(), b.samples().end());
    return AudioBuffer(std::move(s), kCanonicalRate);
}

} // namespace

TEST_CASE("440 Hz sine") {
    const auto c = YinEstimator().estimate(sine(440.0, 1.0));
    int good = 0;
    for (const auto& f : c.frames) {
        if (f.voiced() && std::fabs(*f.f0 - 440.0) <= 0.5 && f.confidence > 0.9) ++good;
    }
    CHECK(good >= 8);
    for (const auto& f : c.frames) {
        if (f.voiced()) CHECK(std::fabs(*f.f0 - 440.0) <= 0.5);
    }
}

TEST_CASE("digital silence is unvoiced with zero confidence") {
    const auto c = estimate_contour(AudioBuffer(std::vector<float>(22050, 0.0f), kCanonicalRate));
    CHECK(c.frames.size() == 10);
    for (const auto& f : c.frames) {
        CHECK_FALSE(f.voiced());
        CHECK(f.confidence == 0.0);
    }
}

TEST_CASE("220 Hz sine median within 10 cents") {
    const auto f0 = voiced_f0(estimate_contour(sine(220.0, 1.0)));
    REQUIRE_FALSE(f0.empty());
    CHECK(std::fabs(oracle::cents(oracle::median(f0), 220.0)) <= 10.0);
}

TEST_CASE("E2 to E5 sines have no octave errors") {
    for (int m = 40; m <= 76; m += 3) {
        const double truth = midi_to_freq(m);
        const auto f0 = voiced_f0(estimate_contour(sine(truth, 1.0)));
        REQUIRE(f0.size() >= 5);
        CHECK(std::fabs(oracle::cents(oracle::median(f0), truth)) <= 20.0);
        std::size_t octave = 0;
        for (double f : f0) octave += std::fabs(std::fabs(oracle::cents(f, truth)) - 1200.0) < 100.0;
        CHECK(octave * 10 <= f0.size());
    }
}

TEST_CASE("frame grid and determinism") {
    const auto buf = sine(330.0, 1.05);
    const auto a = estimate_contour(buf);
    const auto b = estimate_contour(buf);
    REQUIRE(a.frames.size() == contour_frame_count(buf.size(), kCanonicalRate, 0.1));
    CHECK(a.frames.size() == 11);
    for (std::size_t k = 0; k < a.frames.size(); ++k) {
        CHECK(a.frames[k].time == doctest::Approx(0.1 * static_cast<double>(k)));
        CHECK(a.frames[k].f0 == b.frames[k].f0);
        CHECK(a.frames[k].confidence == b.frames[k].confidence);
    }
}

TEST_CASE("invalid frequency range") {
    CHECK_THROWS_AS(estimate_contour(sine(440.0, 0.5), 500.0, 400.0), Error);
}

TEST_CASE("confidence filter") {
    PitchContour c;
    c.frames = {{0.0, 440.0, 0.70}, {0.1, 440.0, 0.69}, {0.2, std::nullopt, 0.0}};
    const auto f = filter_confident(c, 0.70);
    REQUIRE(f.frames.size() == 3);
    CHECK(f.frames[0].voiced());
    CHECK_FALSE(f.frames[1].voiced());
    CHECK_FALSE(f.frames[2].voiced());
    for (std::size_t k = 0; k < 3; ++k) CHECK(f.frames[k].time == c.frames[k].time);

    PitchContour silent;
    silent.frames = {{0.0, std::nullopt, 0.0}, {0.1, std::nullopt, 0.0}};
    const auto s = filter_confident(silent);
    CHECK(s.frames.size() == 2);
    CHECK_FALSE(s.frames[0].voiced());
}

TEST_CASE("frequency to MIDI") {
    CHECK(freq_to_midi(440.0) == 69.0);
    CHECK(freq_to_midi(880.0) == doctest::Approx(81.0).epsilon(1e-12));
    CHECK(std::fabs(freq_to_midi(261.626) - 60.0) <= 0.001);
    CHECK_THROWS_AS(freq_to_midi(0.0), Error);
    CHECK_THROWS_AS(freq_to_midi(-5.0), Error);

    std::mt19937 rng(8);
    std::uniform_real_distribution<double> d(1.0, 10000.0);
    for (int i = 0; i < 1000; ++i) {
        const double f = d(rng);
        CHECK(std::fabs(freq_to_midi(2 * f) - freq_to_midi(f) - 12.0) < 1e-9);
        CHECK(freq_to_midi(f * 1.0001) > freq_to_midi(f));
    }
}

TEST_CASE("note names and rounding") {
    CHECK(midi_name(69) == "A4");
    CHECK(midi_name(60) == "C4");
    CHECK(midi_name(71) == "B4");
    CHECK(midi_name(61) == "C#4");
    CHECK(round_midi(69.5) == 70);
    CHECK(round_midi(68.5) == 69);
    CHECK(round_midi(69.49) == 69);
    CHECK(round_midi(-3.0) == 0);
    CHECK(round_midi(200.0) == 128);
}

TEST_CASE("aggregation examples") {
    SUBCASE("close values form one note") {
        const auto n = contour_to_notes(contour_of({69.1, 69.2, 69.0}));
        REQUIRE(n.sequence.size() == 1);
        CHECK(n.sequence.notes[0].midi == 69);
        CHECK(n.sequence.notes[0].duration == doctest::Approx(0.3));
        CHECK(n.sequence.notes[0].onset == 0.0);
        CHECK(n.sequence.notes[0].mean_unrounded_midi == doctest::Approx(69.1));
        REQUIRE(n.curve.unrounded_midi.size() == 3);
        CHECK(*n.curve.unrounded_midi[1] == doctest::Approx(69.2));
    }
    SUBCASE("unvoiced frames break runs") {
        const auto n = contour_to_notes(contour_of({69.0, 69.0, std::nullopt, 69.0}));
        REQUIRE(n.sequence.size() == 2);
        CHECK(n.sequence.midi() == std::vector<int>{69, 69});
        CHECK(n.sequence.notes[1].onset == doctest::Approx(0.3));
    }
    SUBCASE("all unvoiced") {
        const auto n = contour_to_notes(contour_of({std::nullopt, std::nullopt}));
        CHECK(n.sequence.empty());
        REQUIRE(n.curve.unrounded_midi.size() == 2);
        CHECK_FALSE(n.curve.unrounded_midi[0].has_value());
    }
}

TEST_CASE("aggregation round trip and voiced duration") {
    std::mt19937 rng(12);
    std::uniform_int_distribution<int> midi(55, 60);
    std::uniform_real_distribution<double> jitter(-0.45, 0.45);
    std::bernoulli_distribution unvoiced(0.2);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::optional<double>> frames;
        std::size_t voiced = 0;
        for (int k = 0; k < 40; ++k) {
            if (unvoiced(rng)) {
                frames.push_back(std::nullopt);
            } else {
                frames.push_back(midi(rng) + jitter(rng));
                ++voiced;
            }
        }
        const auto first = contour_to_notes(contour_of(frames)).sequence;
        double total = 0.0;
        for (const auto& n : first.notes) total += n.duration;
        CHECK(total == doctest::Approx(static_cast<double>(voiced) * 0.1));

        std::vector<std::optional<double>> grid(frames.size());
        for (const auto& n : first.notes) {
            const auto k0 = static_cast<std::size_t>(std::lround(n.onset / 0.1));
            const auto len = static_cast<std::size_t>(std::lround(n.duration / 0.1));
            for (std::size_t k = k0; k < k0 + len; ++k) grid[k] = n.midi;
        }
        const auto second = contour_to_notes(contour_of(grid)).sequence;
        REQUIRE(second.size() == first.size());
        for (std::size_t i = 0; i < first.size(); ++i) {
            CHECK(second.notes[i].midi == first.notes[i].midi);
            CHECK(second.notes[i].onset == doctest::Approx(first.notes[i].onset));
            CHECK(second.notes[i].duration == doctest::Approx(first.notes[i].duration));
        }
    }
}

TEST_CASE("region note extraction") {
    const auto tone = sine(440.0, 2.0);
    std::vector<float> inst(static_cast<std::size_t>(kCanonicalRate), 0.0f);
    inst.insert(inst.end(), tone.samples().begin(), tone.samples().end());
    inst.resize(inst.size() + static_cast<std::size_t>(2 * kCanonicalRate), 0.0f);
    const auto stems = passthrough_stems(AudioBuffer(inst, kCanonicalRate));

    Region r{"r", 1.0, 3.0, Track::Instrument};
    const auto n = extract_region_notes(stems, r);
    CHECK(n.sequence.midi() == std::vector<int>{69});
    CHECK(n.sequence.notes[0].onset < 0.2);

    Region quiet{"q", 3.5, 4.9, Track::Instrument};
    CHECK(extract_region_notes(stems, quiet).sequence.empty());

    Region voice{"v", 1.0, 3.0, Track::Voice};
    try {
        extract_region_notes(stems, voice);
        FAIL("expected wrong track");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::WrongTrack);
    }
}

TEST_CASE("two tones give two notes in order") {
    const auto n = extract_notes(two_tones(440.0, 494.0));
    CHECK(n.sequence.midi() == std::vector<int>{69, 71});
}

TEST_CASE("a synthetic phrase transcribes exactly") {
    const std::vector<ToneNote> notes{{60, 0.5}, {64, 0.4}, {67, 0.6}, {72, 0.5}, {71, 0.3}};
    const auto n = extract_notes(AudioBuffer(tone_phrase(notes, kCanonicalRate, 0.5), kCanonicalRate));
    CHECK(n.sequence.midi() == std::vector<int>{60, 64, 67, 72, 71});
}
