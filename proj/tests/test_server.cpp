#include "doctest.h"

#include <chrono>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "lessonlab/json_io.hpp"
#include "lessonlab/lesson.hpp"
#include "lessonlab/server.hpp"
#include "lessonlab/synth.hpp"
#include "support.hpp"

using namespace lessonlab;

namespace {

std::string wav_string(const AudioBuffer& buf, WavSampleFormat format = WavSampleFormat::Pcm16) {
    const auto bytes = encode_wav(buf, format);
    return std::string(bytes.begin(), bytes.end());
}

void append(std::vector<float>& out, const std::vector<float>& part) { out.insert(out.end(), part.begin(), part.end()); }

void append_silence(std::vector<float>& out, double seconds) {
    out.resize(out.size() + static_cast<std::size_t>(seconds * kCanonicalRate), 0.0f);
}

/// Instrument phrases A, B, A separated by talk; the A melody repeats.
StemPair repeated_melody_stems() {
    const std::vector<ToneNote> a{{60, 0.5}, {64, 0.5}, {67, 0.5}, {72, 0.5}};
    const std::vector<ToneNote> b{{69, 0.6}, {65, 0.6}, {62, 0.6}};
    std::vector<float> voice;
    std::vector<float> inst;
    auto talk = [&](double seconds, std::uint64_t seed) {
        append(voice, speech_noise(seconds, kCanonicalRate, 0.5, seed));
        append_silence(inst, seconds);
    };
    auto play = [&](const std::vector<ToneNote>& notes) {
        const auto tone = tone_phrase(notes, kCanonicalRate, 0.5);
        append(inst, tone);
        append_silence(voice, static_cast<double>(tone.size()) / kCanonicalRate);
    };
    auto pause = [&](double seconds) {
        append_silence(voice, seconds);
        append_silence(inst, seconds);
    };
    talk(4.0, 1);
    pause(0.5);
    play(a);
    pause(0.5);
    talk(4.0, 2);
    pause(0.5);
    play(b);
    pause(0.5);
    talk(4.0, 3);
    pause(0.5);
    play(a);
    pause(1.0);
    return make_stem_pair(AudioBuffer(voice, kCanonicalRate), AudioBuffer(inst, kCanonicalRate));
}

struct Fixture {
    testsupport::TempDir dir;
    std::unique_ptr<LessonServer> server;
    std::unique_ptr<httplib::Client> client;
    LessonManifest manifest;
    StemPair stems;

    explicit Fixture(std::size_t max_upload = 64ull * 1024 * 1024, double max_recording = 60.0) {
        stems = repeated_melody_stems();
        write_wav_file(dir / "voice.wav", stems.voice, WavSampleFormat::Float32);
        write_wav_file(dir / "instrument.wav", stems.instrument, WavSampleFormat::Float32);
        manifest = preprocess_lesson({.voice = dir / "voice.wav", .instrument = dir / "instrument.wav"}, {}, {},
                                     dir / "store/lessons/demo", "demo");
        std::filesystem::create_directories(dir / "static");
        std::ofstream(dir / "static/index.html") << "<html>client</html>";

        AppConfig cfg;
        cfg.server.port = 0;
        cfg.server.storage_root = dir / "store";
        cfg.server.static_dir = dir / "static";
        cfg.server.max_upload_bytes = max_upload;
        cfg.server.max_recording_seconds = max_recording;
        server = std::make_unique<LessonServer>(cfg);
        const int port = server->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(60, 0);
    }
    ~Fixture() { server->stop(); }

    const Region& instrument(std::size_t k) const { return manifest.instrument_regions.at(k); }

    AudioBuffer region_audio(const Region& r) const { return stems.instrument.slice_seconds(r.start, r.end); }

    httplib::Result post_json(const std::string& path, const json& body, httplib::Headers headers = {}) {
        return client->Post(path, headers, body.dump(), "application/json");
    }

    httplib::Result record(const std::string& rid, const AudioBuffer& audio, const std::string& speed = "1",
                           httplib::Headers headers = {}) {
        httplib::MultipartFormDataItems items{{"recording", wav_string(audio), "take.wav", "audio/wav"},
                                              {"playback_speed", speed, "", ""}};
        return client->Post("/api/lessons/demo/regions/" + rid + "/recordings", headers, items);
    }

    json session(const std::string& user = "") {
        httplib::Headers h;
        if (!user.empty()) h.emplace("X-User-Id", user);
        auto res = client->Get("/api/lessons/demo/session", h);
        REQUIRE(res);
        REQUIRE(res->status == 200);
        return json::parse(res->body);
    }
};

json body_of(const httplib::Result& res) {
    REQUIRE(res);
    return json::parse(res->body);
}

} // namespace

TEST_CASE("fixture lesson has three instrument phrases with a repeat") {
    Fixture f;
    REQUIRE(f.manifest.instrument_regions.size() == 3);
    REQUIRE(f.manifest.voice_regions.size() == 3);
    const auto a0 = f.manifest.analysis.at(f.instrument(0).id).notes.midi();
    CHECK(a0 == std::vector<int>{60, 64, 67, 72});
    CHECK(f.manifest.analysis.at(f.instrument(2).id).notes.midi() == a0);
}

TEST_CASE("health, manifest and static files") {
    Fixture f;
    auto res = f.client->Get("/api/health");
    REQUIRE(res);
    CHECK(res->status == 200);

    auto first = f.client->Get("/api/lessons/demo");
    auto second = f.client->Get("/api/lessons/demo");
    REQUIRE(first);
    REQUIRE(second);
    CHECK(first->status == 200);
    CHECK(first->body == second->body);
    const auto m = json::parse(first->body);
    CHECK(m.at("lesson_id") == "demo");
    CHECK(m.at("media_url") == "/api/lessons/demo/media");
    CHECK(m.at("instrument_regions").size() == 3);
    CHECK(m.at("waveform_peaks").at("window_seconds") == 0.02);

    res = f.client->Get("/api/lessons/nope");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body).at("error") == "not-found");

    res = f.client->Get("/index.html");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "<html>client</html>");
}

TEST_CASE("media supports byte ranges") {
    Fixture f;
    auto full = f.client->Get("/api/lessons/demo/media");
    REQUIRE(full);
    CHECK(full->status == 200);
    CHECK(full->get_header_value("Content-Type") == "audio/wav");
    auto part = f.client->Get("/api/lessons/demo/media", {{"Range", "bytes=0-99"}});
    REQUIRE(part);
    CHECK(part->status == 206);
    CHECK(part->body.size() == 100);
    CHECK(part->body == full->body.substr(0, 100));
    auto tail = f.client->Get("/api/lessons/demo/media", {{"Range", "bytes=1000-1049"}});
    REQUIRE(tail);
    CHECK(tail->body == full->body.substr(1000, 50));
}

TEST_CASE("upload, job polling and manifest") {
    Fixture f;
    auto res = f.client->Post("/api/lessons", "", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    httplib::MultipartFormDataItems bad{{"mix", "not a wav", "mix.wav", "audio/wav"}};
    res = f.client->Post("/api/lessons", bad);
    REQUIRE(res);
    CHECK(res->status == 400);

    httplib::MultipartFormDataItems half{{"voice", wav_string(f.stems.voice), "v.wav", "audio/wav"}};
    res = f.client->Post("/api/lessons", half);
    REQUIRE(res);
    CHECK(res->status == 400);

    httplib::MultipartFormDataItems items{
        {"voice", wav_string(f.stems.voice, WavSampleFormat::Float32), "voice.wav", "audio/wav"},
        {"instrument", wav_string(f.stems.instrument, WavSampleFormat::Float32), "instrument.wav", "audio/wav"}};
    res = f.client->Post("/api/lessons", items);
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const auto job = json::parse(res->body);
    CHECK(job.at("status") == "queued");
    const auto job_id = job.at("job_id").get<std::string>();

    json polled;
    for (int i = 0; i < 600; ++i) {
        polled = body_of(f.client->Get("/api/jobs/" + job_id));
        if (polled.at("status") == "done" || polled.at("status") == "failed") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    REQUIRE(polled.at("status") == "done");
    CHECK(body_of(f.client->Get("/api/jobs/" + job_id)) == polled);
    CHECK(polled.at("progress") == 1.0);
    const auto lesson_id = polled.at("result").get<std::string>();

    const auto m = body_of(f.client->Get("/api/lessons/" + lesson_id));
    CHECK(m.at("instrument_regions").size() == 3);
    CHECK(m.at("media_url") == "/api/lessons/" + lesson_id + "/media");
    CHECK(m.at("instrument_regions") == json(f.manifest).at("instrument_regions"));

    res = f.client->Get("/api/jobs/unknown");
    REQUIRE(res);
    CHECK(res->status == 404);
}

TEST_CASE("oversized uploads are rejected") {
    Fixture f(4096);
    httplib::MultipartFormDataItems items{{"mix", wav_string(f.stems.instrument), "mix.wav", "audio/wav"}};
    auto res = f.client->Post("/api/lessons", items);
    REQUIRE(res);
    CHECK(res->status == 413);
}

TEST_CASE("recordings longer than the cap are rejected") {
    Fixture f(64ull * 1024 * 1024, 1.0);
    auto res = f.record(f.instrument(0).id, f.region_audio(f.instrument(0)));
    REQUIRE(res);
    CHECK(res->status == 413);
}

TEST_CASE("recording scores") {
    Fixture f;
    const auto& r = f.instrument(0);

    SUBCASE("own audio scores 100 and aces the region") {
        const auto out = body_of(f.record(r.id, f.region_audio(r), "1"));
        CHECK(out.at("report").at("score") == 100.0);
        CHECK(out.at("report").at("missed").empty());
        CHECK(out.at("session").at("region_states").at(r.id) == "aced");
        CHECK(out.at("user_notes").size() == 4);
        CHECK(out.at("reference_curve").at("times").size() == out.at("reference_curve").at("midi").size());
        const auto s = f.session();
        CHECK(s.at("summary") == json{{"to_learn", 5}, {"started", 0}, {"aced", 1}, {"total", 6}});
        CHECK(s.at("history").at(r.id).at("recorded") == 1);
        CHECK(s.at("history").at(r.id).at("aced") == 1);
    }
    SUBCASE("silence scores 0 with every note missed") {
        const AudioBuffer silence(std::vector<float>(44100, 0.0f), kCanonicalRate);
        const auto out = body_of(f.record(r.id, silence));
        CHECK(out.at("report").at("score") == 0.0);
        CHECK(out.at("report").at("missed") == json::array({"C4", "E4", "G4", "C5"}));
        CHECK(out.at("session").at("region_states").at(r.id) == "started");
    }
    SUBCASE("a half speed performance still scores 100") {
        std::vector<ToneNote> slow;
        for (const auto& n : f.manifest.analysis.at(r.id).notes.notes) slow.push_back({n.midi, 2 * n.duration});
        const AudioBuffer take(tone_phrase(slow, 44100.0, 0.4), 44100.0);
        const auto out = body_of(f.record(r.id, take, "0.5"));
        CHECK(out.at("report").at("score") == 100.0);
        CHECK(out.at("playback_speed") == 0.5);
        CHECK(f.session().at("scores").at(r.id)[0].at("playback_speed") == 0.5);
    }
    SUBCASE("raw body upload with a query parameter") {
        auto res = f.client->Post("/api/lessons/demo/regions/" + r.id + "/recordings?playback_speed=0.75",
                                  wav_string(f.region_audio(r)), "audio/wav");
        CHECK(body_of(res).at("playback_speed") == 0.75);
    }
    SUBCASE("bad uploads") {
        auto res = f.client->Post("/api/lessons/demo/regions/" + r.id + "/recordings", "garbage", "audio/wav");
        REQUIRE(res);
        CHECK(res->status == 400);
        res = f.record(f.manifest.voice_regions[0].id, f.region_audio(r));
        REQUIRE(res);
        CHECK(res->status == 400);
        res = f.record("missing", f.region_audio(r));
        REQUIRE(res);
        CHECK(res->status == 404);
    }
}

TEST_CASE("note-free regions cannot be scored") {
    Fixture f;
    const auto& v = f.manifest.voice_regions[0];
    auto created = f.post_json("/api/lessons/demo/regions", {{"start", v.start}, {"end", v.end}, {"track", "instrument"}});
    REQUIRE(created);
    REQUIRE(created->status == 201);
    const auto rid = json::parse(created->body).at("id").get<std::string>();
    CHECK(json::parse(created->body).at("notes").empty());
    auto res = f.record(rid, f.region_audio(f.instrument(0)));
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(json::parse(res->body).at("error") == "empty-target");
}

TEST_CASE("score override") {
    Fixture f;
    const auto& r = f.instrument(1);
    auto res = f.post_json("/api/lessons/demo/events", {{"region_id", r.id}, {"event", "entered"}});
    CHECK(body_of(res).at("region_states").at(r.id) == "started");
    const auto out = body_of(f.post_json("/api/lessons/demo/regions/" + r.id + "/score-override", {{"score", 100}}));
    CHECK(out.at("report").at("overridden") == true);
    CHECK(out.at("report").at("effective_score") == 100.0);
    CHECK(out.at("session").at("region_states").at(r.id) == "aced");

    res = f.post_json("/api/lessons/demo/regions/" + r.id + "/score-override", {{"score", 140}});
    REQUIRE(res);
    CHECK(res->status == 400);
    res = f.post_json("/api/lessons/demo/regions/" + r.id + "/score-override", {{"points", 1}});
    REQUIRE(res);
    CHECK(res->status == 400);
}

TEST_CASE("melody query") {
    Fixture f;
    const auto first = f.instrument(0).id;
    auto out = body_of(f.post_json("/api/lessons/demo/regions/query", {{"rid", first}}));
    CHECK(out.at("matches") == json::array({first, f.instrument(2).id}));
    out = body_of(f.post_json("/api/lessons/demo/regions/query", {{"notes", {69, 65, 62}}}));
    CHECK(out.at("matches") == json::array({f.instrument(1).id}));
    auto res = f.post_json("/api/lessons/demo/regions/query", {{"notes", json::array()}});
    REQUIRE(res);
    CHECK(res->status == 400);
    res = f.post_json("/api/lessons/demo/regions/query", {{"rid", "nope"}});
    REQUIRE(res);
    CHECK(res->status == 404);
}

TEST_CASE("practice events") {
    Fixture f;
    const auto rid = f.instrument(0).id;
    for (int i = 0; i < 3; ++i) f.post_json("/api/lessons/demo/events", {{"region_id", rid}, {"event", "looped"}});
    f.post_json("/api/lessons/demo/events",
                {{"events", {{{"region_id", rid}, {"event", "played"}}, {{"region_id", rid}, {"event", "played"}}}}});
    const auto s = f.session();
    CHECK(s.at("history").at(rid).at("looped") == 3);
    CHECK(s.at("history").at(rid).at("played") == 2);
    CHECK(s.at("revision") == 5);
    CHECK(s.at("summary").at("started") == 1);

    CHECK(f.session("other").at("summary").at("to_learn") == 6);

    auto res = f.post_json("/api/lessons/demo/events", {{"region_id", rid}, {"event", "recorded"}});
    REQUIRE(res);
    CHECK(res->status == 400);
    res = f.post_json("/api/lessons/demo/events", {{"region_id", rid}, {"event", "danced"}});
    REQUIRE(res);
    CHECK(res->status == 400);
    res = f.post_json("/api/lessons/demo/events", {{"region_id", "nope"}, {"event", "played"}});
    REQUIRE(res);
    CHECK(res->status == 404);
    res = f.client->Post("/api/lessons/demo/events", "{oops", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
}

TEST_CASE("region editing") {
    Fixture f;
    const auto& phrase = f.instrument(0);

    auto created = f.post_json("/api/lessons/demo/regions",
                               {{"start", phrase.start + 0.5}, {"end", phrase.start + 0.95}, {"track", "instrument"}});
    REQUIRE(created);
    REQUIRE(created->status == 201);
    const auto region = json::parse(created->body);
    CHECK(region.at("source") == "user");
    CHECK(region.at("notes").size() == 1);
    CHECK(region.at("notes")[0].at("midi") == 64);
    const auto rid = region.at("id").get<std::string>();

    auto patched = f.client->Patch("/api/lessons/demo/regions/" + rid, json{{"end", phrase.start + 1.95}}.dump(),
                                    "application/json");
    const auto wider = body_of(patched);
    CHECK(wider.at("notes").size() == 3);

    auto res = f.client->Patch("/api/lessons/demo/regions/" + rid, json{{"start", 9.0}, {"end", 8.0}}.dump(),
                               "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = f.post_json("/api/lessons/demo/regions", {{"start", 0}, {"end", 1e6}});
    REQUIRE(res);
    CHECK(res->status == 400);

    CHECK(f.session().at("region_states").at(rid) == "to_learn");
    CHECK(body_of(f.client->Get("/api/lessons/demo")).at("instrument_regions").size() == 4);

    res = f.client->Delete("/api/lessons/demo/regions/" + rid);
    REQUIRE(res);
    CHECK(res->status == 200);
    res = f.client->Get("/api/lessons/demo/regions/" + rid);
    REQUIRE(res);
    CHECK(res->status == 404);
    res = f.client->Delete("/api/lessons/demo/regions/" + rid);
    REQUIRE(res);
    CHECK(res->status == 404);

    const auto auto_id = f.instrument(1).id;
    auto edited = body_of(f.client->Patch("/api/lessons/demo/regions/" + auto_id,
                                          json{{"start", f.instrument(1).start - 0.2}}.dump(), "application/json"));
    CHECK(edited.at("source") == "user");
    CHECK(body_of(f.client->Get("/api/lessons/demo/regions/" + auto_id)).at("start") ==
          doctest::Approx(f.instrument(1).start - 0.2));
}

TEST_CASE("stale revisions are rejected on every mutation") {
    Fixture f;
    const auto rid = f.instrument(0).id;
    const httplib::Headers stale{{"X-Session-Revision", "7"}};
    auto expect_conflict = [](const httplib::Result& res) {
        REQUIRE(res);
        CHECK(res->status == 409);
        CHECK(json::parse(res->body).at("error") == "conflict");
    };
    expect_conflict(f.post_json("/api/lessons/demo/events", {{"region_id", rid}, {"event", "played"}}, stale));
    expect_conflict(f.post_json("/api/lessons/demo/regions", {{"start", 1.0}, {"end", 2.0}}, stale));
    expect_conflict(f.client->Patch("/api/lessons/demo/regions/" + rid, stale, json{{"end", 8.0}}.dump(),
                                    "application/json"));
    expect_conflict(f.client->Delete("/api/lessons/demo/regions/" + rid, stale));
    expect_conflict(f.record(rid, f.region_audio(f.instrument(0)), "1", stale));
    expect_conflict(f.post_json("/api/lessons/demo/regions/" + rid + "/score-override", {{"score", 50}}, stale));
    CHECK(f.session().at("revision") == 0);
    CHECK(body_of(f.client->Get("/api/lessons/demo")).at("instrument_regions").size() == 3);

    const httplib::Headers current{{"X-Session-Revision", "0"}};
    auto ok = f.post_json("/api/lessons/demo/events", {{"region_id", rid}, {"event", "played"}}, current);
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(json::parse(ok->body).at("revision") == 1);
}

TEST_CASE("invalid user ids are rejected") {
    Fixture f;
    auto res = f.client->Get("/api/lessons/demo/session", {{"X-User-Id", "../etc"}});
    REQUIRE(res);
    CHECK(res->status == 400);
}
