// lessonlab: batch preprocessing, scoring, evaluation and the HTTP service.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lessonlab/config.hpp"
#include "lessonlab/error.hpp"
#include "lessonlab/files.hpp"
#include "lessonlab/json_io.hpp"
#include "lessonlab/lesson.hpp"
#include "lessonlab/scoring.hpp"
#include "lessonlab/seg_eval.hpp"
#include "lessonlab/segmentation.hpp"
#include "lessonlab/server.hpp"
#include "lessonlab/synth.hpp"

namespace fs = std::filesystem;
using namespace lessonlab;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

AppConfig app_config(const std::string& config_file) {
    std::optional<fs::path> file;
    if (!config_file.empty()) file = config_file;
    return load_config(file, process_environment());
}

std::optional<fs::path> opt_path(const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<fs::path>(s);
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string mix, voice, instrument, media, separator_cmd, out, lesson_id, config;
};

int run_preprocess(const PreprocessArgs& a) {
    LessonInputs inputs{opt_path(a.mix), opt_path(a.voice), opt_path(a.instrument), opt_path(a.media)};
    try {
        check_inputs(inputs);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    auto config = app_config(a.config);
    if (!a.separator_cmd.empty()) config.separator.command_template = a.separator_cmd;
    const fs::path out(a.out);
    std::string lesson_id = a.lesson_id.empty() ? fs::absolute(out).lexically_normal().filename().string() : a.lesson_id;
    if (lesson_id.empty()) lesson_id = "lesson";

    const auto manifest = preprocess_lesson(inputs, config.preprocess, config.separator, out, lesson_id);
    std::cout << json{{"lesson_id", manifest.lesson_id},
                      {"duration", manifest.duration},
                      {"voice_regions", manifest.voice_regions.size()},
                      {"instrument_regions", manifest.instrument_regions.size()},
                      {"out", out.string()}}
                     .dump(2)
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int run_score(const std::string& reference, const std::string& recording, const std::string& config_file) {
    const auto config = app_config(config_file);
    const auto& pitch = config.preprocess.pitch;
    const auto ref = extract_notes(load_canonical(reference), pitch, NoteSource::Reference);
    const auto rec = extract_notes(load_canonical(recording), pitch, NoteSource::UserRecording);
    const auto report = score_performance(ref.sequence, rec.sequence);
    json out = report;
    out["reference_notes"] = notes_to_json(ref.sequence);
    out["recording_notes"] = notes_to_json(rec.sequence);
    std::cout << out.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

std::vector<Region> read_labels(const fs::path& file) {
    try {
        return regions_from_label_json(json::parse(read_text_file(file)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Format, file.string() + ": " + e.what());
    }
}

EvalEntry load_entry(const fs::path& dir, const AppConfig& config) {
    EvalEntry entry;
    entry.name = dir.filename().string();
    entry.truth = read_labels(dir / "truth.json");

    std::optional<StemPair> stems;
    if (fs::exists(dir / "voice.wav") && fs::exists(dir / "instrument.wav")) {
        stems = load_stems(dir / "voice.wav", dir / "instrument.wav");
    } else if (fs::exists(dir / "mix.wav")) {
        stems = config.separator.command_template.empty()
                    ? passthrough_stems(load_canonical(dir / "mix.wav"))
                    : run_external_separator(dir / "mix.wav", config.separator);
    } else {
        throw Error(ErrorCode::NotFound, entry.name + ": no mix.wav or voice.wav + instrument.wav");
    }
    entry.duration = stems->duration();
    if (fs::exists(dir / "predicted.json")) {
        entry.predicted = read_labels(dir / "predicted.json");
    } else {
        entry.predicted = segment_stem(stems->instrument, Track::Instrument, config.preprocess.segmentation).regions;
    }
    return entry;
}

int run_eval(const std::string& corpus, std::uint64_t seed, const std::string& out_dir, const std::string& config_file) {
    const auto config = app_config(config_file);
    const fs::path root(corpus);
    if (!fs::is_directory(root)) throw Error(ErrorCode::NotFound, "corpus directory not found: " + corpus);
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "truth.json")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw Error(ErrorCode::InvalidArgument, "corpus has no entries with truth.json: " + corpus);

    std::vector<EvalEntry> entries;
    for (const auto& d : dirs) {
        std::cerr << "evaluating " << d.filename().string() << "\n";
        entries.push_back(load_entry(d, config));
    }
    EvalSettings settings;
    settings.frame_seconds = config.preprocess.segmentation.window_seconds;
    settings.seed = seed;
    const auto report = evaluate_corpus(entries, settings);

    const fs::path out = out_dir.empty() ? root : fs::path(out_dir);
    auto j = eval_report_to_json(report);
    j["seed"] = seed;
    const auto table = format_eval_table(report);
    write_file_atomic(out / "report.json", j.dump(2) + "\n");
    write_file_atomic(out / "report.txt", table);
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------

LessonServer* g_server = nullptr;

extern "C" void on_signal(int) {
    if (g_server) g_server->stop();
}

struct ServeArgs {
    std::string config, host, storage_root, static_dir;
    int port = -1;
};

int run_serve(const ServeArgs& a) {
    auto config = app_config(a.config);
    if (!a.host.empty()) config.server.host = a.host;
    if (a.port >= 0) config.server.port = a.port;
    if (!a.storage_root.empty()) config.server.storage_root = a.storage_root;
    if (!a.static_dir.empty()) config.server.static_dir = a.static_dir;
    validate(config);

    LessonServer server(config);
    const int port = server.bind();
    std::cerr << "listening on http://" << config.server.host << ":" << port << "\n";
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.serve();
    g_server = nullptr;
    return 0;
}

// ---------------------------------------------------------------------------

int run_synth(const std::string& out, std::uint64_t seed, double duration) {
    SynthOptions o;
    o.seed = seed;
    o.duration = duration;
    const auto lesson = make_synthetic_lesson(o);
    write_synthetic_lesson(out, lesson);
    std::cout << json{{"out", out},
                      {"duration", lesson.stems.duration()},
                      {"instrument_phrases", lesson.phrases.size()},
                      {"voice_segments", lesson.voice_truth.size()}}
                     .dump(2)
              << "\n";
    return 0;
}

int run_synth_corpus(const std::string& out, std::size_t count, std::uint64_t seed) {
    write_synthetic_corpus(out, count, seed);
    std::cout << json{{"out", out}, {"lessons", count}, {"seed", seed}}.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lesson segmentation, note scoring and practice-session service"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* preprocess = app.add_subcommand("preprocess", "Segment a lesson and extract region notes into a directory");
    auto* mix_opt = preprocess->add_option("--mix", pre.mix, "Mixed lesson audio (WAV)");
    auto* voice_opt = preprocess->add_option("--voice", pre.voice, "Voice stem (WAV)");
    auto* instrument_opt =
        preprocess->add_option("--instrument", pre.instrument, "Instrument stem (WAV)");
    mix_opt->excludes(voice_opt)->excludes(instrument_opt);
    voice_opt->needs(instrument_opt);
    instrument_opt->needs(voice_opt);
    preprocess->add_option("--media", pre.media, "Media file served to the client (default: the audio)");
    preprocess->add_option("--separator-cmd", pre.separator_cmd,
                           "External separator command with {input} and {outdir} placeholders");
    preprocess->add_option("--out", pre.out, "Output lesson directory")->required();
    preprocess->add_option("--lesson-id", pre.lesson_id, "Lesson id (default: output directory name)");
    preprocess->add_option("--config", pre.config, "JSON config file");

    std::string reference, recording, score_config;
    auto* score = app.add_subcommand("score", "Score a recording against a reference performance");
    score->add_option("--reference", reference, "Reference audio (WAV)")->required();
    score->add_option("--recording", recording, "User recording (WAV)")->required();
    score->add_option("--config", score_config, "JSON config file");

    std::string corpus, eval_out, eval_config;
    std::uint64_t seed = 0;
    auto* eval = app.add_subcommand("eval", "Evaluate segmentation against labelled lessons and both baselines");
    eval->add_option("--corpus", corpus, "Corpus directory (one subdirectory per lesson)")->required();
    eval->add_option("--seed", seed, "Random-baseline seed")->capture_default_str();
    eval->add_option("--out", eval_out, "Report directory (default: the corpus directory)");
    eval->add_option("--config", eval_config, "JSON config file");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--config", serve_args.config, "JSON config file");
    serve->add_option("--host", serve_args.host, "Listen address");
    serve->add_option("--port", serve_args.port, "Listen port (0 picks a free port)");
    serve->add_option("--storage-root", serve_args.storage_root, "Lesson and session storage directory");
    serve->add_option("--static-dir", serve_args.static_dir, "Web client bundle directory");

    std::string synth_out;
    std::uint64_t synth_seed = 1;
    double synth_duration = 120.0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic lesson with ground truth");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--duration", synth_duration, "Seconds")->capture_default_str()->check(CLI::PositiveNumber);

    std::string corpus_out;
    std::size_t corpus_count = 10;
    std::uint64_t corpus_seed = 1;
    auto* synth_corpus = app.add_subcommand("synth-corpus", "Write the synthetic evaluation corpus");
    synth_corpus->add_option("--out", corpus_out, "Output directory")->required();
    synth_corpus->add_option("--count", corpus_count, "Number of lessons")->capture_default_str();
    synth_corpus->add_option("--seed", corpus_seed, "Seed of the first lesson")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*preprocess) return run_preprocess(pre);
        if (*score) return run_score(reference, recording, score_config);
        if (*eval) return run_eval(corpus, seed, eval_out, eval_config);
        if (*serve) return run_serve(serve_args);
        if (*synth) return run_synth(synth_out, synth_seed, synth_duration);
        if (*synth_corpus) return run_synth_corpus(corpus_out, corpus_count, corpus_seed);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kUsageError;
}
