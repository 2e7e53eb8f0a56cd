#include "lessonlab/server.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"

#include "lessonlab/error.hpp"
#include "lessonlab/files.hpp"
#include "lessonlab/json_io.hpp"
#include "lessonlab/lesson.hpp"
#include "lessonlab/scoring.hpp"
#include "lessonlab/session.hpp"

namespace lessonlab {

namespace fs = std::filesystem;

std::string_view to_string(JobStatus s) {
    switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
    }
    return "queued";
}

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kUserHeader = "X-User-Id";
constexpr const char* kRevisionHeader = "X-Session-Revision";

/// An HTTP-level failure with a status and a machine-readable code.
struct HttpError {
    int status;
    std::string code;
    std::string message;
};

int status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Format:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::EmptyInput:
    case ErrorCode::InvalidArgument:
    case ErrorCode::StemMismatch:
    case ErrorCode::WrongTrack:
    case ErrorCode::EmptyQuery:
        return 400;
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::Conflict:
    case ErrorCode::EmptyTarget:
        return 409;
    case ErrorCode::DegenerateProfile:
    case ErrorCode::SeparatorFailed:
    case ErrorCode::SeparatorOutputMissing:
    case ErrorCode::Config:
    case ErrorCode::CorruptSession:
    case ErrorCode::Io:
        return 500;
    }
    return 500;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, json{{"error", code}, {"message", message}}, status);
}

bool valid_id(const std::string& s) {
    return !s.empty() && s.size() <= 128 && s != "." && s != ".." &&
           std::all_of(s.begin(), s.end(), [](char c) {
               return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
           });
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) throw HttpError{400, "invalid-argument", "request body is empty"};
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw HttpError{400, "format", "request body must be a JSON object"};
        return j;
    } catch (const json::exception& e) {
        throw HttpError{400, "format", std::string("malformed JSON: ") + e.what()};
    }
}

std::string random_hex(std::size_t digits) {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < digits; ++i) out.push_back(hex[rng() % 16]);
    return out;
}

json job_json(const PreprocessJob& job) {
    return json{{"job_id", job.job_id},
                {"status", to_string(job.status)},
                {"progress", job.progress},
                {"error", job.error ? json(*job.error) : json(nullptr)},
                {"result", job.result ? json(*job.result) : json(nullptr)}};
}

} // namespace

// ---------------------------------------------------------------------------
// Lesson cache
// ---------------------------------------------------------------------------

namespace {

struct LessonEntry {
    std::mutex mutex;
    fs::path dir;
    LessonManifest manifest;
    /// Serialized manifest, so unchanged lessons are served byte-identically.
    std::string manifest_text;
    std::optional<StemPair> stems;

    const StemPair& load_stems() {
        if (!stems) stems = read_lesson_stems(dir);
        return *stems;
    }

    void persist() {
        manifest_text = json(manifest).dump();
        write_file_atomic(dir / "manifest.json", manifest_text);
    }
};

} // namespace

struct LessonServer::Impl {
    AppConfig config;
    fs::path root;
    httplib::Server http;
    SessionStore sessions;
    int bound_port = -1;
    std::thread listener;

    std::mutex lessons_mutex;
    std::map<std::string, std::shared_ptr<LessonEntry>> lessons;

    struct QueuedJob {
        std::string job_id;
        std::string lesson_id;
        fs::path staging;
        LessonInputs inputs;
    };
    mutable std::mutex jobs_mutex;
    std::condition_variable jobs_cv;
    std::map<std::string, PreprocessJob> jobs;
    std::deque<QueuedJob> queue;
    bool stopping = false;
    std::thread worker;
    std::atomic<std::uint64_t> job_counter{0};

    explicit Impl(AppConfig c)
        : config(std::move(c)), root(config.server.storage_root), sessions(config.server.storage_root) {
        validate(config);
        std::error_code ec;
        fs::create_directories(root / "lessons", ec);
        fs::create_directories(root / "uploads", ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create storage root " + root.string() + ": " + ec.message());
        const auto threads = config.server.worker_threads;
        http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
        http.set_payload_max_length(config.server.max_upload_bytes);
        routes();
        worker = std::thread([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lock(jobs_mutex);
            stopping = true;
        }
        jobs_cv.notify_all();
        if (worker.joinable()) worker.join();
    }

    // -- helpers ------------------------------------------------------------

    std::shared_ptr<LessonEntry> lesson(const std::string& lesson_id) {
        if (!valid_id(lesson_id)) throw HttpError{404, "not-found", "unknown lesson " + lesson_id};
        std::lock_guard lock(lessons_mutex);
        auto it = lessons.find(lesson_id);
        if (it != lessons.end()) return it->second;
        const auto dir = root / "lessons" / lesson_id;
        if (!fs::exists(dir / "manifest.json")) throw HttpError{404, "not-found", "unknown lesson " + lesson_id};
        auto entry = std::make_shared<LessonEntry>();
        entry->dir = dir;
        entry->manifest_text = read_text_file(dir / "manifest.json");
        try {
            entry->manifest = json::parse(entry->manifest_text).get<LessonManifest>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Format, "manifest of " + lesson_id + ": " + e.what());
        }
        lessons.emplace(lesson_id, entry);
        return entry;
    }

    static std::string user_of(const httplib::Request& req) {
        auto user = req.get_header_value(kUserHeader);
        if (user.empty()) user = "default";
        if (!valid_id(user)) throw HttpError{400, "invalid-argument", "invalid user id"};
        return user;
    }

    SessionState load_session(const LessonEntry& entry, const std::string& user) {
        return sessions.load(entry.manifest.lesson_id, user, entry.manifest.region_ids());
    }

    /// Rejects a mutation whose client-side revision is stale.
    static void check_revision(const httplib::Request& req, const SessionState& state) {
        if (!req.has_header(kRevisionHeader)) return;
        const auto text = req.get_header_value(kRevisionHeader);
        std::uint64_t expected = 0;
        try {
            std::size_t used = 0;
            expected = std::stoull(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw HttpError{400, "invalid-argument", std::string(kRevisionHeader) + " must be an integer"};
        }
        if (expected != state.revision) {
            throw HttpError{409, "conflict",
                            "session revision is " + std::to_string(state.revision) + ", request expected " + text};
        }
    }

    static json region_json(const Region& r, const LessonManifest& m) {
        json j{{"id", r.id},
               {"start", r.start},
               {"end", r.end},
               {"track", to_string(r.track)},
               {"source", to_string(r.source)}};
        auto it = m.analysis.find(r.id);
        if (it != m.analysis.end()) {
            j["notes"] = notes_to_json(it->second.notes);
            j["curve"] = curve_to_json(it->second.curve);
        }
        return j;
    }

    static json session_summary(const SessionState& s, const LessonManifest& m) {
        json states = json::object();
        for (const auto& r : m.all_regions()) {
            auto it = s.region_states.find(r.id);
            states[r.id] = to_string(it == s.region_states.end() ? LearnState::ToLearn : it->second);
        }
        return json{{"lesson_id", s.lesson_id},
                    {"user_id", s.user_id},
                    {"revision", s.revision},
                    {"region_states", states},
                    {"summary", summary_to_json(progression_summary(s, m.all_regions()))}};
    }

    /// Full session document with history hidden for absent regions.
    static json session_view(const SessionState& s, const LessonManifest& m) {
        json j = s;
        json history = json::object();
        json scores = json::object();
        for (const auto& r : m.all_regions()) {
            if (auto it = s.history.find(r.id); it != s.history.end()) history[r.id] = it->second;
            if (j["scores"].contains(r.id)) scores[r.id] = j["scores"][r.id];
        }
        j["history"] = history;
        j["scores"] = scores;
        j["region_states"] = session_summary(s, m)["region_states"];
        j["summary"] = summary_to_json(progression_summary(s, m.all_regions()));
        return j;
    }

    static void check_bounds(double start, double end, double duration) {
        if (!(start >= 0.0 && start < end && end <= duration + 1e-9)) {
            throw HttpError{400, "invalid-argument", "region needs 0 <= start < end <= duration"};
        }
    }

    static void sort_regions(std::vector<Region>& regions) {
        std::stable_sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
            return a.start < b.start || (a.start == b.start && a.end < b.end);
        });
    }

    template <typename F>
    void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const HttpError& e) {
            send_error(res, e.status, e.code, e.message);
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), std::string(lessonlab::to_string(e.code())), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "format", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    // -- jobs ---------------------------------------------------------------

    void update_job(const std::string& id, const std::function<void(PreprocessJob&)>& f) {
        std::lock_guard lock(jobs_mutex);
        f(jobs.at(id));
    }

    void work() {
        while (true) {
            QueuedJob next;
            {
                std::unique_lock lock(jobs_mutex);
                jobs_cv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (stopping) return;
                next = std::move(queue.front());
                queue.pop_front();
                jobs.at(next.job_id).status = JobStatus::Running;
            }
            const auto final_dir = root / "lessons" / next.lesson_id;
            const auto building = root / "lessons" / (".building-" + next.lesson_id);
            try {
                preprocess_lesson(next.inputs, config.preprocess, config.separator, building, next.lesson_id,
                                  [&](double p) { update_job(next.job_id, [p](PreprocessJob& j) { j.progress = p; }); });
                fs::rename(building, final_dir);
                update_job(next.job_id, [&](PreprocessJob& j) {
                    j.status = JobStatus::Done;
                    j.progress = 1.0;
                    j.result = next.lesson_id;
                });
            } catch (const std::exception& e) {
                std::error_code ec;
                fs::remove_all(building, ec);
                const std::string message = e.what();
                update_job(next.job_id, [&](PreprocessJob& j) {
                    j.status = JobStatus::Failed;
                    j.error = message;
                });
            }
            std::error_code ec;
            fs::remove_all(next.staging, ec);
        }
    }

    // -- routes -------------------------------------------------------------

    void routes() {
        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) return;
            const std::string code = res.status == 413 ? "payload-too-large"
                                     : res.status == 404 ? "not-found"
                                                         : "http-" + std::to_string(res.status);
            res.set_content(json{{"error", code}, {"message", httplib::status_message(res.status)}}.dump(), kJson);
        });
        http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
            send_error(res, 500, "internal", "unhandled server error");
        });

        http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, json{{"status", "ok"}});
        });

        http.Post("/api/lessons", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { create_lesson(req, res); });
        });
        http.Get("/api/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto found = job_snapshot(req.path_params.at("id"));
                if (!found) throw HttpError{404, "not-found", "unknown job"};
                send_json(res, job_json(*found));
            });
        });
        http.Get("/api/lessons/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = lesson(req.path_params.at("id"));
                std::lock_guard lock(entry->mutex);
                res.set_content(entry->manifest_text, kJson);
            });
        });
        http.Get("/api/lessons/:id/media", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { serve_media(req, res); });
        });
        http.Post("/api/lessons/:id/regions/query", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { query(req, res); });
        });
        http.Post("/api/lessons/:id/regions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { create_region(req, res); });
        });
        http.Get("/api/lessons/:id/regions/:rid", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = lesson(req.path_params.at("id"));
                std::lock_guard lock(entry->mutex);
                const auto* r = entry->manifest.find(req.path_params.at("rid"));
                if (!r) throw HttpError{404, "not-found", "unknown region"};
                send_json(res, region_json(*r, entry->manifest));
            });
        });
        http.Patch("/api/lessons/:id/regions/:rid", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { patch_region(req, res); });
        });
        http.Delete("/api/lessons/:id/regions/:rid", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { delete_region(req, res); });
        });
        http.Post("/api/lessons/:id/regions/:rid/recordings",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      guarded(res, [&] { recording(req, res); });
                  });
        http.Post("/api/lessons/:id/regions/:rid/score-override",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      guarded(res, [&] { score_override(req, res); });
                  });
        http.Post("/api/lessons/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { events(req, res); });
        });
        http.Get("/api/lessons/:id/session", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto entry = lesson(req.path_params.at("id"));
                std::lock_guard lock(entry->mutex);
                send_json(res, session_view(load_session(*entry, user_of(req)), entry->manifest));
            });
        });

        if (!config.server.static_dir.empty()) {
            if (!http.set_mount_point("/", config.server.static_dir.string())) {
                throw Error(ErrorCode::Config, "static_dir is not a directory: " + config.server.static_dir.string());
            }
        }
    }

    std::optional<PreprocessJob> job_snapshot(const std::string& id) const {
        std::lock_guard lock(jobs_mutex);
        auto it = jobs.find(id);
        if (it == jobs.end()) return std::nullopt;
        return it->second;
    }

    void create_lesson(const httplib::Request& req, httplib::Response& res) {
        if (!req.is_multipart_form_data()) {
            throw HttpError{400, "invalid-argument", "expected multipart/form-data with mix or voice+instrument"};
        }
        LessonInputs inputs;
        const std::string job_id = "job-" + std::to_string(++job_counter) + "-" + random_hex(6);
        const std::string lesson_id = random_hex(12);
        const auto staging = root / "uploads" / job_id;

        std::vector<std::pair<std::string, const httplib::MultipartFormData*>> parts;
        for (const char* name : {"mix", "voice", "instrument", "media"}) {
            if (req.has_file(name)) parts.emplace_back(name, &req.files.find(name)->second);
        }
        const bool has_audio = std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.first != "media"; });
        if (!has_audio) throw HttpError{400, "invalid-argument", "no audio input (mix or voice+instrument)"};
        for (const auto& [name, part] : parts) {
            if (name == "media") continue;
            const auto* bytes = reinterpret_cast<const std::uint8_t*>(part->content.data());
            decode_wav({bytes, part->content.size()});  // reject undecodable uploads before queueing
        }
        check_inputs(LessonInputs{req.has_file("mix") ? std::optional<fs::path>("x") : std::nullopt,
                                  req.has_file("voice") ? std::optional<fs::path>("x") : std::nullopt,
                                  req.has_file("instrument") ? std::optional<fs::path>("x") : std::nullopt,
                                  std::nullopt});

        std::error_code ec;
        fs::create_directories(staging, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot stage upload: " + ec.message());
        for (const auto& [name, part] : parts) {
            std::string ext = ".wav";
            if (name == "media") {
                ext = fs::path(part->filename).extension().string();
                if (ext.empty()) ext = ".bin";
            }
            const auto path = staging / (name + ext);
            write_file_atomic(path, part->content);
            if (name == "mix") inputs.mix = path;
            if (name == "voice") inputs.voice = path;
            if (name == "instrument") inputs.instrument = path;
            if (name == "media") inputs.media = path;
        }

        PreprocessJob job{job_id, JobStatus::Queued, 0.0, std::nullopt, std::nullopt};
        {
            std::lock_guard lock(jobs_mutex);
            jobs.emplace(job_id, job);
            queue.push_back(QueuedJob{job_id, lesson_id, staging, inputs});
        }
        jobs_cv.notify_one();
        send_json(res, job_json(job), 202);
    }

    void serve_media(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        fs::path file;
        {
            std::lock_guard lock(entry->mutex);
            if (!valid_id(entry->manifest.media_file)) throw HttpError{404, "not-found", "lesson has no media"};
            file = entry->dir / entry->manifest.media_file;
        }
        std::error_code ec;
        const auto size = fs::file_size(file, ec);
        if (ec) throw HttpError{404, "not-found", "media file missing"};
        res.set_header("Accept-Ranges", "bytes");
        res.set_content_provider(static_cast<std::size_t>(size), media_content_type(file),
                                 [file](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                                     std::ifstream in(file, std::ios::binary);
                                     if (!in) return false;
                                     in.seekg(static_cast<std::streamoff>(offset));
                                     std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
                                     in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
                                     const auto got = static_cast<std::size_t>(in.gcount());
                                     if (got == 0) return false;
                                     return sink.write(buf.data(), got);
                                 });
    }

    void create_region(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto user = user_of(req);
        std::lock_guard lock(entry->mutex);
        auto& m = entry->manifest;
        auto session = load_session(*entry, user);
        check_revision(req, session);

        Region r;
        r.start = body.at("start").get<double>();
        r.end = body.at("end").get<double>();
        check_bounds(r.start, r.end, m.duration);
        const auto track = parse_track(body.value("track", std::string("instrument")));
        if (!track) throw HttpError{400, "invalid-argument", "track must be voice or instrument"};
        r.track = *track;
        r.source = RegionSource::User;
        r.id = "user-" + std::to_string(m.next_user_region);

        if (r.track == Track::Instrument) m.analysis[r.id] = analyze_region(entry->load_stems(), r, m.config.pitch);
        auto& list = r.track == Track::Voice ? m.voice_regions : m.instrument_regions;
        list.push_back(r);
        sort_regions(list);
        ++m.next_user_region;
        session = add_region(session, r);
        sessions.save(session);
        entry->persist();

        auto out = region_json(r, m);
        out["revision"] = session.revision;
        send_json(res, out, 201);
    }

    void patch_region(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto user = user_of(req);
        const auto rid = req.path_params.at("rid");
        std::lock_guard lock(entry->mutex);
        auto& m = entry->manifest;
        Region* r = m.find(rid);
        if (!r) throw HttpError{404, "not-found", "unknown region " + rid};
        auto session = load_session(*entry, user);
        check_revision(req, session);

        const double start = body.value("start", r->start);
        const double end = body.value("end", r->end);
        check_bounds(start, end, m.duration);
        Region updated = *r;
        updated.start = start;
        updated.end = end;
        updated.source = RegionSource::User;
        if (updated.track == Track::Instrument) {
            m.analysis[rid] = analyze_region(entry->load_stems(), updated, m.config.pitch);
        }
        *r = updated;
        sort_regions(updated.track == Track::Voice ? m.voice_regions : m.instrument_regions);
        session = update_region(session, updated);
        sessions.save(session);
        entry->persist();

        auto out = region_json(*m.find(rid), m);
        out["revision"] = session.revision;
        send_json(res, out);
    }

    void delete_region(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto user = user_of(req);
        const auto rid = req.path_params.at("rid");
        std::lock_guard lock(entry->mutex);
        auto& m = entry->manifest;
        if (!m.find(rid)) throw HttpError{404, "not-found", "unknown region " + rid};
        auto session = load_session(*entry, user);
        check_revision(req, session);

        for (auto* list : {&m.voice_regions, &m.instrument_regions}) {
            list->erase(std::remove_if(list->begin(), list->end(), [&](const Region& x) { return x.id == rid; }),
                        list->end());
        }
        m.analysis.erase(rid);
        session = remove_region(session, rid);
        sessions.save(session);
        entry->persist();
        send_json(res, json{{"deleted", rid}, {"revision", session.revision}});
    }

    /// Reference region plus its notes; throws for voice or note-free regions.
    static std::pair<Region, const RegionAnalysis*> scorable(const LessonManifest& m, const std::string& rid) {
        const Region* r = m.find(rid);
        if (!r) throw HttpError{404, "not-found", "unknown region " + rid};
        if (r->track != Track::Instrument) {
            throw Error(ErrorCode::WrongTrack, "recordings are scored against instrument regions only");
        }
        auto it = m.analysis.find(rid);
        if (it == m.analysis.end() || it->second.notes.empty()) {
            throw Error(ErrorCode::EmptyTarget, "reference region " + rid + " has no notes");
        }
        return {*r, &it->second};
    }

    void recording(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto user = user_of(req);
        const auto rid = req.path_params.at("rid");

        std::string audio;
        double speed = 1.0;
        auto parse_speed = [&](const std::string& text) {
            try {
                speed = std::stod(text);
            } catch (const std::exception&) {
                throw HttpError{400, "invalid-argument", "playback_speed must be a number"};
            }
            if (!(speed > 0.0)) throw HttpError{400, "invalid-argument", "playback_speed must be positive"};
        };
        if (req.is_multipart_form_data()) {
            if (!req.has_file("recording")) throw HttpError{400, "invalid-argument", "missing recording part"};
            audio = req.get_file_value("recording").content;
            if (req.has_file("playback_speed")) parse_speed(req.get_file_value("playback_speed").content);
        } else {
            audio = req.body;
        }
        if (req.has_param("playback_speed")) parse_speed(req.get_param_value("playback_speed"));
        if (audio.empty()) throw HttpError{400, "invalid-argument", "recording is empty"};

        PitchConfig pitch;
        NoteSequence reference;
        MelodyCurve reference_curve;
        {
            std::lock_guard lock(entry->mutex);
            const auto [region, analysis] = scorable(entry->manifest, rid);
            pitch = entry->manifest.config.pitch;
            reference = analysis->notes;
            reference_curve = analysis->curve;
        }

        // Decoding and pitch tracking run outside the lesson lock.
        const auto* bytes = reinterpret_cast<const std::uint8_t*>(audio.data());
        const auto decoded = to_canonical(decode_wav({bytes, audio.size()}));
        if (decoded.duration() > config.server.max_recording_seconds) {
            throw HttpError{413, "payload-too-large", "recording exceeds the configured duration cap"};
        }
        const auto user_notes = extract_notes(decoded, pitch, NoteSource::UserRecording);
        const auto report = score_performance(reference, user_notes.sequence);

        std::lock_guard lock(entry->mutex);
        auto session = load_session(*entry, user);
        check_revision(req, session);
        session = transition(session, rid, SessionEvent::recorded(report, speed));
        sessions.save(session);

        json spans = json::array();
        for (const auto& s : spans_to_time(report.mismatch_spans, reference, user_notes.sequence)) {
            spans.push_back({{"target", {s.target.start, s.target.end}}, {"recording", {s.recording.start, s.recording.end}}});
        }
        send_json(res, json{{"report", report},
                            {"span_times", spans},
                            {"playback_speed", speed},
                            {"user_notes", notes_to_json(user_notes.sequence)},
                            {"user_curve", curve_to_json(user_notes.curve)},
                            {"reference_notes", notes_to_json(reference)},
                            {"reference_curve", curve_to_json(reference_curve)},
                            {"session", session_summary(session, entry->manifest)}});
    }

    void score_override(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto user = user_of(req);
        const auto rid = req.path_params.at("rid");
        if (!body.contains("score") || !body.at("score").is_number()) {
            throw HttpError{400, "invalid-argument", "body needs a numeric score"};
        }
        const double manual = body.at("score").get<double>();

        std::lock_guard lock(entry->mutex);
        const auto [region, analysis] = scorable(entry->manifest, rid);
        auto session = load_session(*entry, user);
        check_revision(req, session);
        ScoreReport base;
        if (auto it = session.scores.find(rid); it != session.scores.end() && !it->second.empty()) {
            base = it->second.back().report;
        } else {
            const auto target = analysis->notes.midi();
            base = score_midi(target, std::span<const int>{});
        }
        const auto report = apply_manual_score(base, manual);
        session = transition(session, rid, SessionEvent::score_overridden(report));
        sessions.save(session);
        send_json(res, json{{"report", report}, {"session", session_summary(session, entry->manifest)}});
    }

    void query(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto body = parse_body(req);
        const double threshold = body.value("threshold", config.query_threshold);
        if (!(threshold >= 0.0 && threshold <= 100.0)) {
            throw HttpError{400, "invalid-argument", "threshold must be in [0, 100]"};
        }
        std::lock_guard lock(entry->mutex);
        const auto& m = entry->manifest;
        NoteSequence q;
        if (body.contains("rid")) {
            const auto rid = body.at("rid").get<std::string>();
            if (!m.find(rid)) throw HttpError{404, "not-found", "unknown region " + rid};
            auto it = m.analysis.find(rid);
            if (it != m.analysis.end()) q = it->second.notes;
        } else if (body.contains("notes")) {
            for (const auto& n : body.at("notes")) {
                q.notes.push_back(Note{n.is_object() ? n.at("midi").get<int>() : n.get<int>(), 0.0, 0.0, 0.0});
            }
        } else {
            throw HttpError{400, "invalid-argument", "body needs rid or notes"};
        }
        std::vector<QueryCandidate> candidates;
        for (const auto& r : m.instrument_regions) {
            auto it = m.analysis.find(r.id);
            if (it != m.analysis.end()) candidates.push_back(QueryCandidate{r, it->second.notes});
        }
        json ids = json::array();
        for (const auto& r : query_regions(q, candidates, threshold)) ids.push_back(r.id);
        send_json(res, json{{"matches", ids}});
    }

    void events(const httplib::Request& req, httplib::Response& res) {
        auto entry = lesson(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto user = user_of(req);
        json list = body.contains("events") ? body.at("events") : json::array({body});
        if (!list.is_array() || list.empty()) throw HttpError{400, "invalid-argument", "no events given"};

        std::lock_guard lock(entry->mutex);
        auto session = load_session(*entry, user);
        check_revision(req, session);
        for (const auto& e : list) {
            const auto rid = e.at("region_id").get<std::string>();
            const auto kind = parse_event_kind(e.at("event").get<std::string>());
            if (!kind) throw HttpError{400, "invalid-argument", "unknown event " + e.at("event").dump()};
            if (*kind == EventKind::Recorded || *kind == EventKind::ScoreOverridden) {
                throw HttpError{400, "invalid-argument",
                                "scored events go through the recordings and score-override endpoints"};
            }
            if (!entry->manifest.find(rid)) throw HttpError{404, "not-found", "unknown region " + rid};
            session = transition(session, rid, SessionEvent{*kind, std::nullopt});
        }
        sessions.save(session);
        send_json(res, session_summary(session, entry->manifest));
    }
};

LessonServer::LessonServer(AppConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

LessonServer::~LessonServer() {
    stop();
}

int LessonServer::bind() {
    const auto& s = impl_->config.server;
    if (s.port == 0) {
        impl_->bound_port = impl_->http.bind_to_any_port(s.host);
    } else if (impl_->http.bind_to_port(s.host, s.port)) {
        impl_->bound_port = s.port;
    } else {
        impl_->bound_port = -1;
    }
    if (impl_->bound_port < 0) {
        throw Error(ErrorCode::Io, "cannot bind " + s.host + ":" + std::to_string(s.port));
    }
    return impl_->bound_port;
}

void LessonServer::serve() {
    impl_->http.listen_after_bind();
}

int LessonServer::start() {
    const int port = bind();
    impl_->listener = std::thread([this] { serve(); });
    impl_->http.wait_until_ready();
    return port;
}

void LessonServer::stop() {
    if (!impl_) return;
    impl_->http.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

int LessonServer::port() const {
    return impl_->bound_port;
}

std::optional<PreprocessJob> LessonServer::job(const std::string& job_id) const {
    return impl_->job_snapshot(job_id);
}

} // namespace lessonlab
