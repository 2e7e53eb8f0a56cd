#include "lessonlab/separation.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sys/wait.h>
#include <unistd.h>

#include "lessonlab/error.hpp"

namespace lessonlab {

namespace fs = std::filesystem;

StemPair make_stem_pair(AudioBuffer voice, AudioBuffer instrument) {
    voice = to_canonical(voice);
    instrument = to_canonical(instrument);
    const double diff = std::fabs(voice.duration() - instrument.duration());
    // A hair of slack so that exactly one window of padding is accepted.
    if (diff > kStemDurationTolerance + 1e-9) {
        throw Error(ErrorCode::StemMismatch,
                    "stem durations differ by " + std::to_string(diff) + " s");
    }
    return StemPair{std::move(voice), std::move(instrument)};
}

StemPair load_stems(const fs::path& voice_path, const fs::path& instrument_path) {
    return make_stem_pair(read_wav_file(voice_path), read_wav_file(instrument_path));
}

StemPair passthrough_stems(const AudioBuffer& mix) {
    AudioBuffer voice(std::vector<float>(mix.size(), 0.0f), mix.sample_rate());
    return StemPair{std::move(voice), mix};
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    out += "'";
    return out;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

fs::path make_temp_dir() {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto dir = fs::temp_directory_path() /
                   ("lessonlab-sep-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
                    std::to_string(counter++));
        if (fs::create_directory(dir)) return dir;
    }
    throw Error(ErrorCode::Io, "cannot create temporary directory");
}

struct TempDirGuard {
    fs::path path;
    bool owned = false;
    ~TempDirGuard() {
        if (owned) {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
    }
};

} // namespace

std::string expand_command_template(const std::string& command_template, const fs::path& input,
                                    const fs::path& outdir) {
    if (command_template.find("{input}") == std::string::npos ||
        command_template.find("{outdir}") == std::string::npos) {
        throw Error(ErrorCode::Config,
                    "separator command must contain {input} and {outdir} placeholders");
    }
    std::string cmd = command_template;
    replace_all(cmd, "{input}", shell_quote(input.string()));
    replace_all(cmd, "{outdir}", shell_quote(outdir.string()));
    return cmd;
}

StemPair run_external_separator(const fs::path& mix_path, const SeparatorConfig& config,
                                std::optional<fs::path> workdir) {
    TempDirGuard guard;
    if (workdir) {
        fs::create_directories(*workdir);
        guard.path = *workdir;
    } else {
        guard.path = make_temp_dir();
        guard.owned = true;
    }
    const std::string cmd = expand_command_template(config.command_template, mix_path, guard.path);

    FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
    if (pipe == nullptr) {
        throw Error(ErrorCode::SeparatorFailed, "cannot launch separator: " + cmd);
    }
    std::string diagnostics;
    std::array<char, 512> chunk{};
    while (std::fgets(chunk.data(), static_cast<int>(chunk.size()), pipe) != nullptr) {
        if (diagnostics.size() < 64 * 1024) diagnostics += chunk.data();
    }
    const int status = ::pclose(pipe);
    const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (exit_code != 0) {
        throw Error(ErrorCode::SeparatorFailed,
                    "separator exited with status " + std::to_string(exit_code) + ": " + diagnostics);
    }

    const fs::path voice = guard.path / config.voice_file;
    const fs::path instrument = guard.path / config.instrument_file;
    for (const auto& p : {voice, instrument}) {
        if (!fs::exists(p)) {
            throw Error(ErrorCode::SeparatorOutputMissing, "separator did not produce " + p.string());
        }
    }
    return load_stems(voice, instrument);
}

} // namespace lessonlab
