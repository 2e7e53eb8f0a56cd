#include "doctest.h"

#include <cmath>
#include <random>

#include "lessonlab/error.hpp"
#include "lessonlab/segmentation.hpp"
#include "lessonlab/synth.hpp"
#include "oracles.hpp"

using namespace lessonlab;

namespace {

SilenceLabels labels_from(const std::vector<int>& bits) {
    SilenceLabels l;
    for (int b : bits) l.labels.push_back(b != 0);
    return l;
}

/// Labels at 0.02 s resolution with non-silent spans given in seconds.
SilenceLabels labels_for(const std::vector<std::pair<double, double>>& spans, double total) {
    SilenceLabels l;
    l.labels.assign(static_cast<std::size_t>(std::lround(total / 0.02)), false);
    for (const auto& [s, e] : spans) {
        for (auto i = std::lround(s / 0.02); i < std::lround(e / 0.02); ++i) l.labels[static_cast<std::size_t>(i)] = true;
    }
    return l;
}

EnergyProfile bimodal(std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> lo(0.008, 0.012);
    std::uniform_real_distribution<double> hi(0.58, 0.62);
    EnergyProfile p;
    for (int i = 0; i < 500; ++i) p.rms.push_back(lo(rng));
    for (int i = 0; i < 500; ++i) p.rms.push_back(hi(rng));
    std::shuffle(p.rms.begin(), p.rms.end(), rng);
    return p;
}

} // namespace

TEST_CASE("rms of simple windows") {
    const WindowSpec four{4.0 / kCanonicalRate, 4};
    CHECK(compute_rms(AudioBuffer({0, 0, 0, 0}, kCanonicalRate), four).rms == std::vector<double>{0.0});
    CHECK(compute_rms(AudioBuffer({0.5f, 0.5f, 0.5f, 0.5f}, kCanonicalRate), four).rms[0] == doctest::Approx(0.5));
    CHECK(compute_rms(AudioBuffer({1, 0, 1, 0}, kCanonicalRate), four).rms[0] == doctest::Approx(std::sqrt(0.5)));
    CHECK(compute_rms(AudioBuffer({}, kCanonicalRate), four).rms.empty());
}

TEST_CASE("partial tail window uses its own length") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    std::vector<float> s(1000);
    for (auto& v : s) v = d(rng);
    const auto profile = compute_rms(AudioBuffer(s, kCanonicalRate), WindowSpec::canonical());
    REQUIRE(profile.rms.size() == 3);
    CHECK(profile.rms[2] == doctest::Approx(oracle::rms({s.begin() + 882, s.end()})));
    CHECK(profile.rms[0] == doctest::Approx(oracle::rms({s.begin(), s.begin() + 441})));
}

TEST_CASE("bimodal profile threshold separates the populations") {
    for (std::uint32_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const auto p = bimodal(seed);
        const double t = adaptive_threshold(p, 100, 2.0);
        CHECK(t > 0.02);
        CHECK(t < 0.55);
        // Brute force: the separating thresholds are exactly those in (max low, min high].
        double max_lo = 0.0;
        double min_hi = 1.0;
        for (double r : p.rms) {
            if (r < 0.3) max_lo = std::max(max_lo, r);
            else min_hi = std::min(min_hi, r);
        }
        CHECK(t > max_lo);
        CHECK(t <= min_hi);
        const auto labels = label_silence(p, t);
        for (std::size_t i = 0; i < p.rms.size(); ++i) CHECK(labels.labels[i] == (p.rms[i] > 0.3));
    }
}

TEST_CASE("degenerate profiles") {
    EnergyProfile flat;
    flat.rms.assign(200, 0.3);
    try {
        adaptive_threshold(flat);
        FAIL("expected degenerate profile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateProfile);
    }
}

TEST_CASE("gaussian kernel sums to one and is truncated at 4 sigma") {
    const auto k = gaussian_kernel(2.0);
    CHECK(k.size() == 17);
    double s = 0.0;
    for (double v : k) s += v;
    CHECK(s == doctest::Approx(1.0));
    CHECK(k[8] > k[7]);
    CHECK(k[0] == doctest::Approx(k[16]));
}

TEST_CASE("label_silence") {
    EnergyProfile p;
    p.rms = {0.0, 0.5};
    CHECK(label_silence(p, 0.1).labels == std::vector<bool>{false, true});
    CHECK(label_silence(p, 0.0).labels == std::vector<bool>{true, true});
    CHECK(label_silence(p, 0.6).labels == std::vector<bool>{false, false});
    CHECK(label_silence(p, 0.5).labels == std::vector<bool>{false, true});
}

TEST_CASE("labels are monotone in rms and in the threshold") {
    const auto p = bimodal(9);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> d(0.0, 0.7);
    for (int trial = 0; trial < 50; ++trial) {
        double a = d(rng);
        double b = d(rng);
        if (a > b) std::swap(a, b);
        const auto la = label_silence(p, a);
        const auto lb = label_silence(p, b);
        for (std::size_t i = 0; i < p.rms.size(); ++i) {
            if (lb.labels[i]) CHECK(la.labels[i]);
            for (std::size_t j = 0; j < 20; ++j) {
                if (p.rms[i] >= p.rms[j] && la.labels[j]) CHECK(la.labels[i]);
            }
        }
    }
}

TEST_CASE("grouping examples") {
    GroupingOptions opts;
    SUBCASE("small gap merges") {
        const auto r = group_regions(labels_for({{0.0, 0.5}, {1.0, 2.2}}, 3.0), 0.02, opts);
        REQUIRE(r.size() == 1);
        CHECK(r[0].start == doctest::Approx(0.0));
        CHECK(r[0].end == doctest::Approx(2.2));
        CHECK(r[0].state == LearnState::ToLearn);
        CHECK(r[0].source == RegionSource::Auto);
    }
    SUBCASE("large gap splits") {
        const auto r = group_regions(labels_for({{0.0, 1.5}, {4.0, 5.5}}, 6.0), 0.02, opts);
        REQUIRE(r.size() == 2);
        CHECK(r[0].end == doctest::Approx(1.5));
        CHECK(r[1].start == doctest::Approx(4.0));
    }
    SUBCASE("short region is dropped") {
        CHECK(group_regions(labels_for({{0.0, 0.8}}, 2.0), 0.02, opts).empty());
    }
}

TEST_CASE("gap and duration boundary conventions") {
    GroupingOptions opts;
    for (double gap : {1.9, 2.0, 2.1}) {
        const auto r = group_regions(labels_for({{0.0, 1.0}, {1.0 + gap, 2.0 + gap}}, 5.0), 0.02, opts);
        CHECK(r.size() == (gap <= 2.0 ? 1u : 2u));
    }
    for (double len : {0.9, 1.0, 1.1}) {
        const auto r = group_regions(labels_for({{0.4, 0.4 + len}}, 3.0), 0.02, opts);
        CHECK(r.size() == (len >= 1.0 ? 1u : 0u));
    }
}

TEST_CASE("region ends are clipped to the total duration") {
    GroupingOptions opts;
    opts.total_duration = 1.51;
    const auto r = group_regions(labels_from(std::vector<int>(76, 1)), 0.02, opts);
    REQUIRE(r.size() == 1);
    CHECK(r[0].end == doctest::Approx(1.51));
}

TEST_CASE("grouping is idempotent on its own output") {
    std::mt19937 rng(21);
    std::bernoulli_distribution flip(0.02);
    GroupingOptions opts;
    for (int trial = 0; trial < 200; ++trial) {
        SilenceLabels l;
        bool on = false;
        for (int i = 0; i < 1500; ++i) {
            if (flip(rng)) on = !on;
            l.labels.push_back(on);
        }
        const auto first = group_regions(l, 0.02, opts);
        std::vector<std::pair<double, double>> spans;
        for (const auto& r : first) spans.emplace_back(r.start, r.end);
        const auto second = group_regions(labels_for(spans, 30.0), 0.02, opts);
        REQUIRE(first.size() == second.size());
        for (std::size_t k = 0; k < first.size(); ++k) {
            CHECK(first[k].start == doctest::Approx(second[k].start));
            CHECK(first[k].end == doctest::Approx(second[k].end));
        }
        for (std::size_t k = 0; k < first.size(); ++k) {
            CHECK(first[k].length() >= 1.0 - 1e-9);
            if (k > 0) CHECK(first[k].start - first[k - 1].end > 2.0);
        }
    }
}

TEST_CASE("passthrough stems leave the voice empty") {
    std::vector<ToneNote> notes{{69, 2.0}};
    auto tone = tone_phrase(notes, kCanonicalRate, 0.5);
    std::vector<float> mix(static_cast<std::size_t>(kCanonicalRate), 0.0f);
    mix.insert(mix.end(), tone.begin(), tone.end());
    mix.resize(mix.size() + static_cast<std::size_t>(kCanonicalRate), 0.0f);
    const auto seg = segment_lesson(passthrough_stems(AudioBuffer(mix, kCanonicalRate)));
    CHECK(seg.voice.regions.empty());
    REQUIRE(seg.instrument.regions.size() == 1);
    CHECK(seg.instrument.regions[0].start == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("speech then tone gives one region per stem") {
    const std::size_t n = static_cast<std::size_t>(3 * kCanonicalRate);
    auto speech = speech_noise(3.0, kCanonicalRate, 0.5, 5);
    speech.resize(2 * n, 0.0f);
    std::vector<float> inst(n, 0.0f);
    const auto tone = sine(440.0, 3.0);
    inst.insert(inst.end(), tone.samples().begin(), tone.samples().end());
    const auto seg = segment_lesson(make_stem_pair(AudioBuffer(speech, kCanonicalRate), AudioBuffer(inst, kCanonicalRate)));
    REQUIRE(seg.voice.regions.size() == 1);
    REQUIRE(seg.instrument.regions.size() == 1);
    CHECK(std::fabs(seg.voice.regions[0].start - 0.0) <= 0.1);
    CHECK(std::fabs(seg.voice.regions[0].end - 3.0) <= 0.1);
    CHECK(std::fabs(seg.instrument.regions[0].start - 3.0) <= 0.1);
    CHECK(std::fabs(seg.instrument.regions[0].end - 6.0) <= 0.1);
    CHECK(seg.voice.regions[0].track == Track::Voice);
    CHECK(seg.instrument.regions[0].track == Track::Instrument);
}

TEST_CASE("empty stems give no regions") {
    const auto seg = segment_lesson(StemPair{AudioBuffer({}, kCanonicalRate), AudioBuffer({}, kCanonicalRate)});
    CHECK(seg.voice.regions.empty());
    CHECK(seg.instrument.regions.empty());
}

TEST_CASE("a constant stem falls back to the fixed ratio") {
    const AudioBuffer c(std::vector<float>(44100, 0.3f), kCanonicalRate);
    const auto seg = segment_stem(c, Track::Instrument, {});
    CHECK(seg.threshold_fallback);
    CHECK(seg.threshold == doctest::Approx(0.05));
    CHECK(seg.regions.size() == 1);
}

TEST_CASE("segmentation invariants on a synthetic lesson") {
    SynthOptions o;
    o.duration = 60;
    o.seed = 3;
    const auto lesson = make_synthetic_lesson(o);
    const auto a = segment_lesson(lesson.stems);
    const auto b = segment_lesson(lesson.stems);
    for (const auto* s : {&a.voice, &a.instrument}) {
        for (std::size_t k = 0; k < s->regions.size(); ++k) {
            const auto& r = s->regions[k];
            CHECK(r.length() >= 1.0 - 1e-9);
            if (k > 0) CHECK(r.start >= s->regions[k - 1].end);
            const auto i0 = static_cast<std::size_t>(std::lround(r.start / 0.02));
            const auto i1 = static_cast<std::size_t>(std::lround(r.end / 0.02));
            bool any = false;
            for (auto i = i0; i < i1 && i < s->labels.labels.size(); ++i) any = any || s->labels.labels[i];
            CHECK(any);
        }
    }
    REQUIRE(a.instrument.regions.size() == b.instrument.regions.size());
    for (std::size_t k = 0; k < a.instrument.regions.size(); ++k) CHECK(a.instrument.regions[k] == b.instrument.regions[k]);
}
