#include "lessonlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "lessonlab/error.hpp"

extern char** environ;

namespace lessonlab {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::Config, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::Config, "unknown key " + where + "." + key);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json segmentation_json(const SegmentationConfig& c) {
    return json{{"window_seconds", c.window_seconds},   {"histogram_bins", c.histogram_bins},
                {"smoothing_sigma", c.smoothing_sigma}, {"fallback_ratio", c.fallback_ratio},
                {"gap_threshold", c.gap_threshold},     {"min_duration", c.min_duration}};
}

json pitch_json(const PitchConfig& c) {
    return json{{"frame_seconds", c.frame_seconds}, {"window_samples", c.window_samples},
                {"yin_threshold", c.yin_threshold}, {"f_min", c.f_min},
                {"f_max", c.f_max},                 {"silence_rms", c.silence_rms},
                {"min_confidence", c.min_confidence}, {"stability_semitones", c.stability_semitones}};
}

} // namespace

void to_json(json& j, const PreprocessConfig& c) {
    j = json{{"segmentation", segmentation_json(c.segmentation)},
             {"pitch", pitch_json(c.pitch)},
             {"peaks_window_seconds", c.peaks_window_seconds}};
}

void from_json(const json& j, PreprocessConfig& c) {
    reject_unknown(j, {"segmentation", "pitch", "peaks_window_seconds"}, "preprocess");
    read(j, "peaks_window_seconds", c.peaks_window_seconds);
    if (j.contains("segmentation")) {
        const auto& s = j.at("segmentation");
        reject_unknown(s, {"window_seconds", "histogram_bins", "smoothing_sigma", "fallback_ratio", "gap_threshold",
                           "min_duration"},
                       "preprocess.segmentation");
        auto& o = c.segmentation;
        read(s, "window_seconds", o.window_seconds);
        read(s, "histogram_bins", o.histogram_bins);
        read(s, "smoothing_sigma", o.smoothing_sigma);
        read(s, "fallback_ratio", o.fallback_ratio);
        read(s, "gap_threshold", o.gap_threshold);
        read(s, "min_duration", o.min_duration);
    }
    if (j.contains("pitch")) {
        const auto& p = j.at("pitch");
        reject_unknown(p, {"frame_seconds", "window_samples", "yin_threshold", "f_min", "f_max", "silence_rms",
                           "min_confidence", "stability_semitones"},
                       "preprocess.pitch");
        auto& o = c.pitch;
        read(p, "frame_seconds", o.frame_seconds);
        read(p, "window_samples", o.window_samples);
        read(p, "yin_threshold", o.yin_threshold);
        read(p, "f_min", o.f_min);
        read(p, "f_max", o.f_max);
        read(p, "silence_rms", o.silence_rms);
        read(p, "min_confidence", o.min_confidence);
        read(p, "stability_semitones", o.stability_semitones);
    }
}

void to_json(json& j, const AppConfig& c) {
    j = json{{"server",
              {{"host", c.server.host},
               {"port", c.server.port},
               {"storage_root", c.server.storage_root.string()},
               {"static_dir", c.server.static_dir.string()},
               {"max_upload_bytes", c.server.max_upload_bytes},
               {"max_recording_seconds", c.server.max_recording_seconds},
               {"worker_threads", c.server.worker_threads}}},
             {"separator",
              {{"command", c.separator.command_template},
               {"voice_file", c.separator.voice_file},
               {"instrument_file", c.separator.instrument_file}}},
             {"preprocess", c.preprocess},
             {"query_threshold", c.query_threshold}};
}

void from_json(const json& j, AppConfig& c) {
    try {
        reject_unknown(j, {"server", "separator", "preprocess", "query_threshold"}, "config");
        if (j.contains("server")) {
            const auto& s = j.at("server");
            reject_unknown(s, {"host", "port", "storage_root", "static_dir", "max_upload_bytes",
                               "max_recording_seconds", "worker_threads"},
                           "server");
            read(s, "host", c.server.host);
            read(s, "port", c.server.port);
            if (s.contains("storage_root")) c.server.storage_root = s.at("storage_root").get<std::string>();
            if (s.contains("static_dir")) c.server.static_dir = s.at("static_dir").get<std::string>();
            read(s, "max_upload_bytes", c.server.max_upload_bytes);
            read(s, "max_recording_seconds", c.server.max_recording_seconds);
            read(s, "worker_threads", c.server.worker_threads);
        }
        if (j.contains("separator")) {
            const auto& s = j.at("separator");
            reject_unknown(s, {"command", "voice_file", "instrument_file"}, "separator");
            read(s, "command", c.separator.command_template);
            read(s, "voice_file", c.separator.voice_file);
            read(s, "instrument_file", c.separator.instrument_file);
        }
        if (j.contains("preprocess")) c.preprocess = j.at("preprocess").get<PreprocessConfig>();
        read(j, "query_threshold", c.query_threshold);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, e.what());
    }
}

void validate(const AppConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::Config, what);
    };
    const auto& seg = c.preprocess.segmentation;
    const auto& p = c.preprocess.pitch;
    require(c.server.port >= 0 && c.server.port <= 65535, "server.port must be in [0, 65535]");
    require(c.server.max_upload_bytes > 0, "server.max_upload_bytes must be positive");
    require(c.server.max_recording_seconds > 0, "server.max_recording_seconds must be positive");
    require(c.server.worker_threads > 0, "server.worker_threads must be positive");
    require(!c.separator.voice_file.empty() && !c.separator.instrument_file.empty(),
            "separator stem file names must not be empty");
    require(seg.window_seconds > 0, "segmentation.window_seconds must be positive");
    require(seg.histogram_bins >= 3, "segmentation.histogram_bins must be at least 3");
    require(seg.smoothing_sigma >= 0, "segmentation.smoothing_sigma must not be negative");
    require(seg.fallback_ratio > 0 && seg.fallback_ratio < 1, "segmentation.fallback_ratio must be in (0, 1)");
    require(seg.gap_threshold >= 0, "segmentation.gap_threshold must not be negative");
    require(seg.min_duration >= 0, "segmentation.min_duration must not be negative");
    require(p.frame_seconds > 0, "pitch.frame_seconds must be positive");
    require(p.window_samples >= 64, "pitch.window_samples must be at least 64");
    require(p.yin_threshold > 0 && p.yin_threshold < 1, "pitch.yin_threshold must be in (0, 1)");
    require(p.f_min > 0 && p.f_min < p.f_max, "pitch needs 0 < f_min < f_max");
    require(p.min_confidence >= 0 && p.min_confidence <= 1, "pitch.min_confidence must be in [0, 1]");
    require(p.stability_semitones >= 0, "pitch.stability_semitones must not be negative");
    require(c.preprocess.peaks_window_seconds > 0, "peaks_window_seconds must be positive");
    require(c.query_threshold >= 0 && c.query_threshold <= 100, "query_threshold must be in [0, 100]");
}

Environment process_environment() {
    Environment env;
    for (char** e = environ; e && *e; ++e) {
        std::string entry(*e);
        if (entry.rfind("LESSONLAB_", 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return env;
}

void apply_environment(AppConfig& c, const Environment& env) {
    auto get = [&](const char* key) -> const std::string* {
        auto it = env.find(key);
        return it == env.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("LESSONLAB_HOST")) c.server.host = *v;
    if (const auto* v = get("LESSONLAB_PORT")) {
        char* end = nullptr;
        const long port = std::strtol(v->c_str(), &end, 10);
        if (v->empty() || *end != '\0') throw Error(ErrorCode::Config, "LESSONLAB_PORT is not an integer: " + *v);
        c.server.port = static_cast<int>(port);
    }
    if (const auto* v = get("LESSONLAB_STORAGE_ROOT")) c.server.storage_root = *v;
    if (const auto* v = get("LESSONLAB_STATIC_DIR")) c.server.static_dir = *v;
    if (const auto* v = get("LESSONLAB_SEPARATOR_CMD")) c.separator.command_template = *v;
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const Environment& env) {
    AppConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw Error(ErrorCode::Config, "cannot read config file " + file->string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Config, file->string() + ": " + e.what());
        }
        c = j.get<AppConfig>();
    }
    apply_environment(c, env);
    validate(c);
    return c;
}

} // namespace lessonlab
