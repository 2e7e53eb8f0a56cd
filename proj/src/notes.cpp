#include "lessonlab/notes.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lessonlab/error.hpp"

namespace lessonlab {

std::vector<int> NoteSequence::midi() const {
    std::vector<int> out;
    out.reserve(notes.size());
    for (const auto& n : notes) out.push_back(n.midi);
    return out;
}

double freq_to_midi(double f) {
    if (!(f > 0.0)) throw Error(ErrorCode::InvalidArgument, "frequency must be positive");
    return 12.0 * std::log2(f / 440.0) + 69.0;
}

std::string midi_name(int midi) {
    static constexpr std::array<const char*, 12> kNames = {"C", "C#", "D", "D#", "E", "F",
                                                           "F#", "G", "G#", "A", "A#", "B"};
    const int pc = ((midi % 12) + 12) % 12;
    const int octave = (midi - pc) / 12 - 1;
    return std::string(kNames[static_cast<std::size_t>(pc)]) + std::to_string(octave);
}

int round_midi(double unrounded) {
    // std::round is half-away-from-zero.
    const auto r = static_cast<long>(std::round(unrounded));
    return static_cast<int>(std::clamp<long>(r, kMinMidi, kMaxMidi));
}

NoteExtraction contour_to_notes(const PitchContour& contour, NoteSource source) {
    NoteExtraction out;
    out.contour = contour;
    out.sequence.source = source;
    out.curve.times.reserve(contour.frames.size());
    out.curve.unrounded_midi.reserve(contour.frames.size());

    const double hop = contour.frame_seconds;
    int run_midi = -1;  // -1 while no run is open
    std::size_t run_frames = 0;
    double run_onset = 0.0;
    double run_sum = 0.0;

    auto close_run = [&] {
        if (run_midi >= 0 && run_frames > 0) {
            out.sequence.notes.push_back(Note{run_midi, run_onset, static_cast<double>(run_frames) * hop,
                                              run_sum / static_cast<double>(run_frames)});
        }
        run_midi = -1;
        run_frames = 0;
        run_sum = 0.0;
    };

    for (const auto& frame : contour.frames) {
        out.curve.times.push_back(frame.time);
        if (!frame.f0) {
            out.curve.unrounded_midi.push_back(std::nullopt);
            close_run();
            continue;
        }
        const double m = freq_to_midi(*frame.f0);
        out.curve.unrounded_midi.push_back(m);
        const int rounded = round_midi(m);
        if (run_midi >= 0 && run_midi != rounded) close_run();
        if (run_midi < 0) {
            run_midi = rounded;
            run_onset = frame.time;
        }
        ++run_frames;
        run_sum += m;
    }
    close_run();
    return out;
}

NoteExtraction extract_notes(const AudioBuffer& buf, const PitchConfig& config, NoteSource source) {
    const auto contour = YinEstimator(config).estimate(buf);
    return contour_to_notes(filter_confident(contour, config.min_confidence), source);
}

NoteExtraction extract_region_notes(const StemPair& stems, const Region& region, const PitchConfig& config) {
    if (region.track != Track::Instrument) {
        throw Error(ErrorCode::WrongTrack, "note extraction runs on instrument regions only");
    }
    if (!(region.start >= 0.0 && region.start < region.end)) {
        throw Error(ErrorCode::InvalidArgument, "region bounds are inverted");
    }
    return extract_notes(stems.instrument.slice_seconds(region.start, region.end), config,
                         NoteSource::Reference);
}

} // namespace lessonlab
