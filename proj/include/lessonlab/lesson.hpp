#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lessonlab/config.hpp"
#include "lessonlab/notes.hpp"
#include "lessonlab/region.hpp"
#include "lessonlab/separation.hpp"

namespace lessonlab {

struct RegionAnalysis {
    NoteSequence notes;
    MelodyCurve curve;
    /// Confidence-filtered contour the notes were built from.
    PitchContour contour;
};

/// Min/max envelope, one pair per window.
struct StemPeaks {
    std::vector<float> min;
    std::vector<float> max;
};

struct WaveformPeaks {
    double window_seconds = kAnalysisWindowSeconds;
    StemPeaks voice;
    StemPeaks instrument;
};

struct LessonManifest {
    std::string lesson_id;
    double duration = 0.0;
    std::string media_url;
    /// File name of the media inside the lesson directory.
    std::string media_file;
    std::vector<Region> voice_regions;
    std::vector<Region> instrument_regions;
    /// Keyed by instrument region id.
    std::map<std::string, RegionAnalysis> analysis;
    WaveformPeaks peaks;
    PreprocessConfig config;
    double voice_threshold = 0.0;
    double instrument_threshold = 0.0;
    bool voice_threshold_fallback = false;
    bool instrument_threshold_fallback = false;
    std::uint64_t next_user_region = 1;

    /// Voice then instrument regions, each in timeline order.
    std::vector<Region> all_regions() const;
    std::vector<std::string> region_ids() const;
    const Region* find(const std::string& region_id) const;
    Region* find(const std::string& region_id);
};

void to_json(nlohmann::json& j, const LessonManifest& m);
void from_json(const nlohmann::json& j, LessonManifest& m);

std::string media_url_for(const std::string& lesson_id);

StemPeaks compute_peaks(const AudioBuffer& buf, double window_seconds);

/// Notes and curve for one instrument region.
RegionAnalysis analyze_region(const StemPair& stems, const Region& region, const PitchConfig& config);

/// Segmentation, per-region note extraction and peaks over a stem pair.
/// Media fields are left empty.
LessonManifest build_manifest(const StemPair& stems, const PreprocessConfig& config, const std::string& lesson_id);

struct LessonInputs {
    std::optional<std::filesystem::path> mix{};
    std::optional<std::filesystem::path> voice{};
    std::optional<std::filesystem::path> instrument{};
    std::optional<std::filesystem::path> media{};
};

/// Exactly one of mix or (voice, instrument). Throws InvalidArgument.
void check_inputs(const LessonInputs& inputs);

using ProgressFn = std::function<void(double)>;

/// Separation (if needed), segmentation, note extraction and peaks, then
/// writes manifest.json, media.* and stems/{voice,instrument}.wav into
/// `lesson_dir`. Without a separator command a mix is treated as
/// instrument-only.
LessonManifest preprocess_lesson(const LessonInputs& inputs, const PreprocessConfig& config,
                                 const SeparatorConfig& separator, const std::filesystem::path& lesson_dir,
                                 const std::string& lesson_id, const ProgressFn& progress = {});

/// Atomic replace of lesson_dir/manifest.json.
void write_manifest(const std::filesystem::path& lesson_dir, const LessonManifest& manifest);
LessonManifest read_manifest(const std::filesystem::path& lesson_dir);
StemPair read_lesson_stems(const std::filesystem::path& lesson_dir);

/// Best-effort MIME type from a file extension.
std::string media_content_type(const std::filesystem::path& file);

} // namespace lessonlab
