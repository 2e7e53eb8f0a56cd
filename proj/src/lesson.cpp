#include "lessonlab/lesson.hpp"

#include <algorithm>
#include <cctype>

#include "lessonlab/error.hpp"
#include "lessonlab/files.hpp"
#include "lessonlab/json_io.hpp"
#include "lessonlab/segmentation.hpp"

namespace lessonlab {

namespace fs = std::filesystem;

std::vector<Region> LessonManifest::all_regions() const {
    std::vector<Region> out = voice_regions;
    out.insert(out.end(), instrument_regions.begin(), instrument_regions.end());
    return out;
}

std::vector<std::string> LessonManifest::region_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : all_regions()) ids.push_back(r.id);
    return ids;
}

const Region* LessonManifest::find(const std::string& region_id) const {
    for (const auto* list : {&voice_regions, &instrument_regions}) {
        for (const auto& r : *list) {
            if (r.id == region_id) return &r;
        }
    }
    return nullptr;
}

Region* LessonManifest::find(const std::string& region_id) {
    return const_cast<Region*>(std::as_const(*this).find(region_id));
}

namespace {

json peaks_json(const StemPeaks& p) {
    json min = json::array();
    json max = json::array();
    for (float v : p.min) min.push_back(round_to(v, 4));
    for (float v : p.max) max.push_back(round_to(v, 4));
    return json{{"min", min}, {"max", max}};
}

StemPeaks peaks_from_json(const json& j) {
    return StemPeaks{j.at("min").get<std::vector<float>>(), j.at("max").get<std::vector<float>>()};
}

json region_json(const Region& r, const LessonManifest& m) {
    json j{{"id", r.id},
           {"start", r.start},
           {"end", r.end},
           {"track", to_string(r.track)},
           {"source", to_string(r.source)}};
    if (r.track == Track::Instrument) {
        auto it = m.analysis.find(r.id);
        if (it != m.analysis.end()) {
            j["notes"] = notes_to_json(it->second.notes);
            j["curve"] = curve_to_json(it->second.curve);
            j["contour"] = contour_to_json(it->second.contour);
        }
    }
    return j;
}

Region region_from_json(const json& j, LessonManifest& m) {
    Region r;
    r.id = j.at("id").get<std::string>();
    r.start = j.at("start").get<double>();
    r.end = j.at("end").get<double>();
    const auto track = parse_track(j.at("track").get<std::string>());
    const auto source = parse_region_source(j.at("source").get<std::string>());
    if (!track || !source) throw Error(ErrorCode::Format, "invalid region " + r.id);
    r.track = *track;
    r.source = *source;
    if (j.contains("notes")) {
        m.analysis[r.id] = RegionAnalysis{notes_from_json(j.at("notes")), curve_from_json(j.at("curve")),
                                          contour_from_json(j.at("contour"))};
    }
    return r;
}

} // namespace

void to_json(json& j, const LessonManifest& m) {
    json voice = json::array();
    json instrument = json::array();
    for (const auto& r : m.voice_regions) voice.push_back(region_json(r, m));
    for (const auto& r : m.instrument_regions) instrument.push_back(region_json(r, m));
    j = json{{"schema", 1},
             {"lesson_id", m.lesson_id},
             {"duration", m.duration},
             {"media_url", m.media_url},
             {"media_file", m.media_file},
             {"voice_regions", voice},
             {"instrument_regions", instrument},
             {"waveform_peaks",
              {{"window_seconds", m.peaks.window_seconds},
               {"voice", peaks_json(m.peaks.voice)},
               {"instrument", peaks_json(m.peaks.instrument)}}},
             {"preprocessing_config", m.config},
             {"thresholds",
              {{"voice", m.voice_threshold},
               {"instrument", m.instrument_threshold},
               {"voice_fallback", m.voice_threshold_fallback},
               {"instrument_fallback", m.instrument_threshold_fallback}}},
             {"next_user_region", m.next_user_region}};
}

void from_json(const json& j, LessonManifest& m) {
    if (j.value("schema", 0) != 1) throw Error(ErrorCode::Format, "unsupported manifest schema");
    m = LessonManifest{};
    m.lesson_id = j.at("lesson_id").get<std::string>();
    m.duration = j.at("duration").get<double>();
    m.media_url = j.at("media_url").get<std::string>();
    m.media_file = j.at("media_file").get<std::string>();
    for (const auto& r : j.at("voice_regions")) m.voice_regions.push_back(region_from_json(r, m));
    for (const auto& r : j.at("instrument_regions")) m.instrument_regions.push_back(region_from_json(r, m));
    const auto& peaks = j.at("waveform_peaks");
    m.peaks.window_seconds = peaks.at("window_seconds").get<double>();
    m.peaks.voice = peaks_from_json(peaks.at("voice"));
    m.peaks.instrument = peaks_from_json(peaks.at("instrument"));
    m.config = j.at("preprocessing_config").get<PreprocessConfig>();
    const auto& t = j.at("thresholds");
    m.voice_threshold = t.at("voice").get<double>();
    m.instrument_threshold = t.at("instrument").get<double>();
    m.voice_threshold_fallback = t.at("voice_fallback").get<bool>();
    m.instrument_threshold_fallback = t.at("instrument_fallback").get<bool>();
    m.next_user_region = j.at("next_user_region").get<std::uint64_t>();
}

std::string media_url_for(const std::string& lesson_id) {
    return "/api/lessons/" + lesson_id + "/media";
}

StemPeaks compute_peaks(const AudioBuffer& buf, double window_seconds) {
    StemPeaks out;
    for (const auto& w : windows(buf, WindowSpec::from_seconds(window_seconds, buf.sample_rate()))) {
        const auto [lo, hi] = std::minmax_element(w.samples.begin(), w.samples.end());
        out.min.push_back(*lo);
        out.max.push_back(*hi);
    }
    return out;
}

RegionAnalysis analyze_region(const StemPair& stems, const Region& region, const PitchConfig& config) {
    auto extraction = extract_region_notes(stems, region, config);
    return RegionAnalysis{std::move(extraction.sequence), std::move(extraction.curve),
                          std::move(extraction.contour)};
}

LessonManifest build_manifest(const StemPair& stems, const PreprocessConfig& config, const std::string& lesson_id) {
    const auto seg = segment_lesson(stems, config.segmentation);
    LessonManifest m;
    m.lesson_id = lesson_id;
    m.duration = stems.duration();
    m.voice_regions = seg.voice.regions;
    m.instrument_regions = seg.instrument.regions;
    for (const auto& r : m.instrument_regions) m.analysis[r.id] = analyze_region(stems, r, config.pitch);
    m.peaks.window_seconds = config.peaks_window_seconds;
    m.peaks.voice = compute_peaks(stems.voice, config.peaks_window_seconds);
    m.peaks.instrument = compute_peaks(stems.instrument, config.peaks_window_seconds);
    m.config = config;
    m.voice_threshold = seg.voice.threshold;
    m.instrument_threshold = seg.instrument.threshold;
    m.voice_threshold_fallback = seg.voice.threshold_fallback;
    m.instrument_threshold_fallback = seg.instrument.threshold_fallback;
    return m;
}

void check_inputs(const LessonInputs& inputs) {
    const bool stems = inputs.voice || inputs.instrument;
    if (inputs.mix && stems) throw Error(ErrorCode::InvalidArgument, "give either a mix or a stem pair, not both");
    if (!inputs.mix && !stems) throw Error(ErrorCode::InvalidArgument, "no audio input given");
    if (stems && !(inputs.voice && inputs.instrument)) {
        throw Error(ErrorCode::InvalidArgument, "a stem pair needs both voice and instrument");
    }
}

namespace {

std::string safe_extension(const fs::path& file) {
    std::string ext = file.extension().string();
    if (ext.size() < 2 || ext.size() > 6) return ".bin";
    for (std::size_t i = 1; i < ext.size(); ++i) {
        const auto c = static_cast<unsigned char>(ext[i]);
        if (!std::isalnum(c)) return ".bin";
        ext[i] = static_cast<char>(std::tolower(c));
    }
    return ext;
}

AudioBuffer mixdown(const StemPair& stems) {
    const auto a = stems.voice.samples();
    const auto b = stems.instrument.samples();
    std::vector<float> out(std::max(a.size(), b.size()), 0.0f);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return AudioBuffer(std::move(out), stems.instrument.sample_rate());
}

void copy_file_over(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot copy " + from.string() + ": " + ec.message());
}

} // namespace

LessonManifest preprocess_lesson(const LessonInputs& inputs, const PreprocessConfig& config,
                                 const SeparatorConfig& separator, const fs::path& lesson_dir,
                                 const std::string& lesson_id, const ProgressFn& progress) {
    check_inputs(inputs);
    auto report = [&](double p) {
        if (progress) progress(p);
    };

    StemPair stems = [&] {
        if (inputs.voice) return load_stems(*inputs.voice, *inputs.instrument);
        if (!separator.command_template.empty()) return run_external_separator(*inputs.mix, separator);
        return passthrough_stems(load_canonical(*inputs.mix));
    }();
    report(0.3);

    LessonManifest manifest = build_manifest(stems, config, lesson_id);
    report(0.8);

    std::error_code ec;
    fs::create_directories(lesson_dir / "stems", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + lesson_dir.string() + ": " + ec.message());
    write_wav_file(lesson_dir / "stems" / "voice.wav", stems.voice, WavSampleFormat::Float32);
    write_wav_file(lesson_dir / "stems" / "instrument.wav", stems.instrument, WavSampleFormat::Float32);

    if (inputs.media) {
        manifest.media_file = "media" + safe_extension(*inputs.media);
        copy_file_over(*inputs.media, lesson_dir / manifest.media_file);
    } else if (inputs.mix) {
        manifest.media_file = "media.wav";
        copy_file_over(*inputs.mix, lesson_dir / manifest.media_file);
    } else {
        manifest.media_file = "media.wav";
        write_wav_file(lesson_dir / manifest.media_file, mixdown(stems));
    }
    manifest.media_url = media_url_for(lesson_id);
    write_manifest(lesson_dir, manifest);
    report(1.0);
    return manifest;
}

void write_manifest(const fs::path& lesson_dir, const LessonManifest& manifest) {
    write_file_atomic(lesson_dir / "manifest.json", json(manifest).dump());
}

LessonManifest read_manifest(const fs::path& lesson_dir) {
    const auto text = read_text_file(lesson_dir / "manifest.json");
    try {
        return json::parse(text).get<LessonManifest>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, (lesson_dir / "manifest.json").string() + ": " + e.what());
    }
}

StemPair read_lesson_stems(const fs::path& lesson_dir) {
    return load_stems(lesson_dir / "stems" / "voice.wav", lesson_dir / "stems" / "instrument.wav");
}

std::string media_content_type(const fs::path& file) {
    static const std::map<std::string, std::string> types = {
        {".wav", "audio/wav"},  {".mp3", "audio/mpeg"}, {".ogg", "audio/ogg"},  {".m4a", "audio/mp4"},
        {".flac", "audio/flac"}, {".mp4", "video/mp4"},  {".webm", "video/webm"}, {".mov", "video/quicktime"},
    };
    auto it = types.find(safe_extension(file));
    return it == types.end() ? "application/octet-stream" : it->second;
}

} // namespace lessonlab
