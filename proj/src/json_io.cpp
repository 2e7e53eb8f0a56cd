#include "lessonlab/json_io.hpp"

#include <cmath>

#include "lessonlab/error.hpp"

namespace lessonlab {

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double r = std::round(value * scale) / scale;
    return r == 0.0 ? 0.0 : r;  // no "-0.0" in documents
}

namespace {

template <typename Enum, typename Parser>
Enum parse_enum(const json& j, const char* key, Parser parse) {
    const auto s = j.at(key).get<std::string>();
    const auto v = parse(s);
    if (!v) throw Error(ErrorCode::Format, std::string("invalid ") + key + ": " + s);
    return *v;
}

json nullable(const std::optional<double>& v, int decimals) {
    return v ? json(round_to(*v, decimals)) : json(nullptr);
}

} // namespace

// ---------------------------------------------------------------------------
// Region
// ---------------------------------------------------------------------------

void to_json(json& j, const Region& r) {
    j = json{{"id", r.id},
             {"start", r.start},
             {"end", r.end},
             {"track", to_string(r.track)},
             {"source", to_string(r.source)},
             {"state", to_string(r.state)}};
}

void from_json(const json& j, Region& r) {
    r.id = j.at("id").get<std::string>();
    r.start = j.at("start").get<double>();
    r.end = j.at("end").get<double>();
    r.track = parse_enum<Track>(j, "track", parse_track);
    r.source = j.contains("source") ? parse_enum<RegionSource>(j, "source", parse_region_source) : RegionSource::Auto;
    r.state = j.contains("state") ? parse_enum<LearnState>(j, "state", parse_learn_state) : LearnState::ToLearn;
}

// ---------------------------------------------------------------------------
// ScoreReport
// ---------------------------------------------------------------------------

void to_json(json& j, const ScoreReport& r) {
    json spans = json::array();
    for (const auto& s : r.mismatch_spans) {
        spans.push_back({{"t", {s.target.begin, s.target.end}}, {"r", {s.recording.begin, s.recording.end}}});
    }
    j = json{{"score", round_to(r.score_percent, 2)},
             {"matched", r.matched_count},
             {"target_total", r.target_count},
             {"missed", r.missed_notes},
             {"spans", spans},
             {"overridden", r.overridden},
             {"manual", r.manual_score ? json(*r.manual_score) : json(nullptr)},
             {"effective_score", round_to(r.effective_score(), 2)}};
}

void from_json(const json& j, ScoreReport& r) {
    r.matched_count = j.at("matched").get<std::size_t>();
    r.target_count = j.at("target_total").get<std::size_t>();
    // The document carries a rounded score; recompute the exact one.
    r.score_percent = r.target_count > 0 ? 100.0 * static_cast<double>(r.matched_count) /
                                               static_cast<double>(r.target_count)
                                         : j.at("score").get<double>();
    r.missed_notes = j.at("missed").get<std::vector<std::string>>();
    r.mismatch_spans.clear();
    for (const auto& s : j.at("spans")) {
        const auto t = s.at("t").get<std::vector<std::size_t>>();
        const auto rr = s.at("r").get<std::vector<std::size_t>>();
        if (t.size() != 2 || rr.size() != 2) throw Error(ErrorCode::Format, "span must be [begin, end]");
        r.mismatch_spans.push_back({{t[0], t[1]}, {rr[0], rr[1]}});
    }
    r.overridden = j.value("overridden", false);
    if (j.contains("manual") && !j.at("manual").is_null()) {
        r.manual_score = j.at("manual").get<double>();
    } else {
        r.manual_score.reset();
    }
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

void to_json(json& j, const PracticeCounters& c) {
    j = json{{"played", c.played}, {"looped", c.looped}, {"recorded", c.recorded}, {"aced", c.aced}};
}

void from_json(const json& j, PracticeCounters& c) {
    c.played = j.at("played").get<std::uint64_t>();
    c.looped = j.at("looped").get<std::uint64_t>();
    c.recorded = j.at("recorded").get<std::uint64_t>();
    c.aced = j.at("aced").get<std::uint64_t>();
}

void to_json(json& j, const SessionState& s) {
    json states = json::object();
    for (const auto& [id, st] : s.region_states) states[id] = to_string(st);
    json scores = json::object();
    for (const auto& [id, records] : s.scores) {
        json list = json::array();
        for (const auto& rec : records) {
            json entry = rec.report;
            entry["playback_speed"] = rec.playback_speed;
            list.push_back(std::move(entry));
        }
        scores[id] = std::move(list);
    }
    j = json{{"schema", 1},
             {"lesson_id", s.lesson_id},
             {"user_id", s.user_id},
             {"revision", s.revision},
             {"region_states", states},
             {"history", s.history},
             {"scores", scores},
             {"user_regions", s.user_regions}};
}

void from_json(const json& j, SessionState& s) {
    if (j.value("schema", 0) != 1) throw Error(ErrorCode::Format, "unsupported session schema");
    s.lesson_id = j.at("lesson_id").get<std::string>();
    s.user_id = j.at("user_id").get<std::string>();
    s.revision = j.at("revision").get<std::uint64_t>();
    s.region_states.clear();
    for (const auto& [id, v] : j.at("region_states").items()) {
        const auto st = parse_learn_state(v.get<std::string>());
        if (!st) throw Error(ErrorCode::Format, "invalid region state for " + id);
        s.region_states[id] = *st;
    }
    s.history = j.at("history").get<std::map<std::string, PracticeCounters>>();
    s.scores.clear();
    for (const auto& [id, list] : j.at("scores").items()) {
        auto& out = s.scores[id];
        for (const auto& entry : list) {
            out.push_back(ScoreRecord{entry.get<ScoreReport>(), entry.value("playback_speed", 1.0)});
        }
    }
    s.user_regions = j.at("user_regions").get<std::vector<Region>>();
}

json summary_to_json(const ProgressionSummary& s) {
    return json{{"to_learn", s.to_learn}, {"started", s.started}, {"aced", s.aced}, {"total", s.total()}};
}

// ---------------------------------------------------------------------------
// Notes and curves
// ---------------------------------------------------------------------------

json notes_to_json(const NoteSequence& seq) {
    json out = json::array();
    for (const auto& n : seq.notes) {
        out.push_back({{"midi", n.midi}, {"onset", round_to(n.onset, 3)}, {"duration", round_to(n.duration, 3)}});
    }
    return out;
}

NoteSequence notes_from_json(const json& j, NoteSource source) {
    NoteSequence seq;
    seq.source = source;
    for (const auto& n : j) {
        Note note;
        note.midi = n.at("midi").get<int>();
        note.onset = n.value("onset", 0.0);
        note.duration = n.value("duration", 0.0);
        note.mean_unrounded_midi = note.midi;
        seq.notes.push_back(note);
    }
    return seq;
}

json curve_to_json(const MelodyCurve& curve) {
    json times = json::array();
    json midi = json::array();
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        times.push_back(round_to(curve.times[i], 4));
        midi.push_back(nullable(curve.unrounded_midi[i], 4));
    }
    return json{{"times", times}, {"midi", midi}};
}

MelodyCurve curve_from_json(const json& j) {
    MelodyCurve c;
    c.times = j.at("times").get<std::vector<double>>();
    for (const auto& v : j.at("midi")) {
        c.unrounded_midi.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    if (c.times.size() != c.unrounded_midi.size()) {
        throw Error(ErrorCode::Format, "melody curve arrays differ in length");
    }
    return c;
}

json contour_to_json(const PitchContour& contour) {
    json times = json::array();
    json f0 = json::array();
    json conf = json::array();
    for (const auto& f : contour.frames) {
        times.push_back(round_to(f.time, 4));
        f0.push_back(nullable(f.f0, 4));
        conf.push_back(round_to(f.confidence, 4));
    }
    return json{{"frame_seconds", contour.frame_seconds}, {"times", times}, {"f0", f0}, {"confidence", conf}};
}

PitchContour contour_from_json(const json& j) {
    PitchContour c;
    c.frame_seconds = j.at("frame_seconds").get<double>();
    const auto& times = j.at("times");
    const auto& f0 = j.at("f0");
    const auto& conf = j.at("confidence");
    if (times.size() != f0.size() || times.size() != conf.size()) {
        throw Error(ErrorCode::Format, "pitch contour arrays differ in length");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        PitchFrame f;
        f.time = times[i].get<double>();
        if (!f0[i].is_null()) f.f0 = f0[i].get<double>();
        f.confidence = conf[i].get<double>();
        c.frames.push_back(f);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

json metric_json(const MetricSet& m) {
    return json{{"precision", m.precision},
                {"recall", m.recall},
                {"f1", m.f1},
                {"boundary_similarity", m.boundary_similarity}};
}

json mean_sd_json(const MeanSd& v) {
    return json{{"mean", v.mean}, {"sd", v.sd}};
}

} // namespace

json eval_report_to_json(const EvalReport& report) {
    json summary = json::object();
    for (const auto& [condition, s] : report.summary) {
        summary[condition] = json{{"precision", mean_sd_json(s.precision)},
                                  {"recall", mean_sd_json(s.recall)},
                                  {"f1", mean_sd_json(s.f1)},
                                  {"boundary_similarity", mean_sd_json(s.boundary_similarity)}};
    }
    json entries = json::array();
    for (std::size_t k = 0; k < report.entry_names.size(); ++k) {
        json e{{"name", report.entry_names[k]}};
        for (const auto& [condition, metrics] : report.per_entry) e[condition] = metric_json(metrics[k]);
        entries.push_back(std::move(e));
    }
    return json{{"summary", summary}, {"entries", entries}};
}

std::vector<Region> regions_from_label_json(const json& j, Track track) {
    if (!j.is_array()) throw Error(ErrorCode::Format, "label file must hold a JSON array");
    std::vector<Region> out;
    for (const auto& item : j) {
        Region r;
        r.id = "truth-" + std::to_string(out.size());
        r.start = item.at("start").get<double>();
        r.end = item.at("end").get<double>();
        r.track = track;
        if (!(r.start < r.end)) throw Error(ErrorCode::Format, "label region with start >= end");
        out.push_back(r);
    }
    return out;
}

json regions_to_label_json(const std::vector<Region>& regions) {
    json out = json::array();
    for (const auto& r : regions) out.push_back({{"start", r.start}, {"end", r.end}});
    return out;
}

} // namespace lessonlab
