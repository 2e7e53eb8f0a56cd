#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>

#include "lessonlab/audio.hpp"

namespace lessonlab {

/// Voice and instrument stems at the canonical rate, durations within one
/// analysis window of each other.
struct StemPair {
    AudioBuffer voice;
    AudioBuffer instrument;

    double duration() const { return std::max(voice.duration(), instrument.duration()); }
};

inline constexpr double kStemDurationTolerance = 0.02;

struct SeparatorConfig {
    /// Shell command with `{input}` and `{outdir}` placeholders.
    std::string command_template;
    std::string voice_file = "vocals.wav";
    std::string instrument_file = "accompaniment.wav";
};

/// Validates rate and duration agreement. Throws StemMismatch.
StemPair make_stem_pair(AudioBuffer voice, AudioBuffer instrument);

StemPair load_stems(const std::filesystem::path& voice_path,
                    const std::filesystem::path& instrument_path);

/// Runs an external separation tool. When `workdir` is empty a fresh
/// temporary directory is created and removed afterwards.
StemPair run_external_separator(const std::filesystem::path& mix_path,
                                const SeparatorConfig& config,
                                std::optional<std::filesystem::path> workdir = std::nullopt);

/// Degraded mode for instrument-only lessons: silent voice, the mix as instrument.
StemPair passthrough_stems(const AudioBuffer& mix);

/// Fills the placeholders with shell-quoted paths. Throws Config when a
/// placeholder is missing.
std::string expand_command_template(const std::string& command_template,
                                    const std::filesystem::path& input,
                                    const std::filesystem::path& outdir);

} // namespace lessonlab
