#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "lessonlab/pitch.hpp"
#include "lessonlab/segmentation.hpp"
#include "lessonlab/separation.hpp"

namespace lessonlab {

/// Parameters that shape a lesson's analysis. Stored in every manifest.
struct PreprocessConfig {
    SegmentationConfig segmentation;
    PitchConfig pitch;
    /// Waveform envelope resolution for the client.
    double peaks_window_seconds = kAnalysisWindowSeconds;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path storage_root = "data";
    /// Directory with the web client bundle; empty disables static serving.
    std::filesystem::path static_dir;
    std::size_t max_upload_bytes = 512ull * 1024 * 1024;
    double max_recording_seconds = 60.0;
    std::size_t worker_threads = 8;
};

struct AppConfig {
    ServerConfig server;
    SeparatorConfig separator;
    PreprocessConfig preprocess;
    double query_threshold = 80.0;
};

void to_json(nlohmann::json& j, const PreprocessConfig& c);
void from_json(const nlohmann::json& j, PreprocessConfig& c);
void to_json(nlohmann::json& j, const AppConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, AppConfig& c);

/// Rejects out-of-range values. Throws Config.
void validate(const AppConfig& c);

using Environment = std::map<std::string, std::string>;

/// Snapshot of the LESSONLAB_* process environment variables.
Environment process_environment();

/// LESSONLAB_HOST, LESSONLAB_PORT, LESSONLAB_STORAGE_ROOT, LESSONLAB_STATIC_DIR,
/// LESSONLAB_SEPARATOR_CMD. Throws Config on malformed values.
void apply_environment(AppConfig& c, const Environment& env);

/// Defaults, then the optional file, then the environment. Throws Config.
AppConfig load_config(const std::optional<std::filesystem::path>& file, const Environment& env);

} // namespace lessonlab
