#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lessonlab/pitch.hpp"
#include "lessonlab/region.hpp"
#include "lessonlab/separation.hpp"

namespace lessonlab {

inline constexpr int kMinMidi = 0;
inline constexpr int kMaxMidi = 128;

struct Note {
    int midi = 0;
    double onset = 0.0;
    double duration = 0.0;
    double mean_unrounded_midi = 0.0;

    bool operator==(const Note&) const = default;
};

enum class NoteSource { Reference, UserRecording };

struct NoteSequence {
    std::vector<Note> notes;
    NoteSource source = NoteSource::Reference;

    std::vector<int> midi() const;
    bool empty() const { return notes.empty(); }
    std::size_t size() const { return notes.size(); }
};

/// Unrounded pitch per frame on the contour grid; nullopt where unvoiced.
struct MelodyCurve {
    std::vector<double> times;
    std::vector<std::optional<double>> unrounded_midi;
};

struct NoteExtraction {
    NoteSequence sequence;
    MelodyCurve curve;
    PitchContour contour;
};

/// 12 * log2(f / 440) + 69.
double freq_to_midi(double f);

/// Scientific pitch name with sharps, MIDI 69 -> "A4", 60 -> "C4".
std::string midi_name(int midi);

/// Rounds half away from zero and clamps to [0, 128].
int round_midi(double unrounded);

NoteExtraction contour_to_notes(const PitchContour& contour, NoteSource source = NoteSource::Reference);

/// Full single-buffer pipeline: contour, confidence filter, aggregation.
NoteExtraction extract_notes(const AudioBuffer& buf, const PitchConfig& config = {},
                             NoteSource source = NoteSource::Reference);

/// Slices the instrument stem to the region and extracts its notes; onsets
/// are relative to region.start. Throws WrongTrack for voice regions.
NoteExtraction extract_region_notes(const StemPair& stems, const Region& region,
                                    const PitchConfig& config = {});

} // namespace lessonlab
