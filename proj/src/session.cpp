#include "lessonlab/session.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "lessonlab/error.hpp"
#include "lessonlab/files.hpp"
#include "lessonlab/json_io.hpp"

namespace lessonlab {

namespace fs = std::filesystem;

std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::Entered: return "entered";
    case EventKind::Played: return "played";
    case EventKind::Looped: return "looped";
    case EventKind::Recorded: return "recorded";
    case EventKind::ScoreOverridden: return "score_overridden";
    }
    return "entered";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (auto k : {EventKind::Entered, EventKind::Played, EventKind::Looped, EventKind::Recorded,
                   EventKind::ScoreOverridden}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

SessionState fresh_session(std::string lesson_id, std::string user_id, const std::vector<std::string>& region_ids) {
    SessionState s;
    s.lesson_id = std::move(lesson_id);
    s.user_id = std::move(user_id);
    for (const auto& id : region_ids) s.region_states[id] = LearnState::ToLearn;
    return s;
}

SessionState transition(const SessionState& state, const std::string& region_id, const SessionEvent& event) {
    auto it = state.region_states.find(region_id);
    if (it == state.region_states.end()) throw Error(ErrorCode::NotFound, "unknown region: " + region_id);
    const bool needs_attempt = event.kind == EventKind::Recorded || event.kind == EventKind::ScoreOverridden;
    if (needs_attempt && !event.attempt) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(event.kind)) + " event without a score");
    }

    SessionState next = state;
    auto& st = next.region_states[region_id];
    auto& counters = next.history[region_id];

    switch (event.kind) {
    case EventKind::Played: ++counters.played; break;
    case EventKind::Looped: ++counters.looped; break;
    case EventKind::Recorded: ++counters.recorded; break;
    case EventKind::Entered:
    case EventKind::ScoreOverridden: break;
    }
    if (event.attempt) next.scores[region_id].push_back(*event.attempt);

    if (st == LearnState::ToLearn) st = LearnState::Started;
    if (event.attempt && event.attempt->report.perfect()) {
        ++counters.aced;
        st = LearnState::Aced;
    }
    ++next.revision;
    return next;
}

namespace {

void check_bounds(const Region& region) {
    if (region.id.empty()) throw Error(ErrorCode::InvalidArgument, "region id must not be empty");
    if (!(region.start >= 0.0) || !(region.end > region.start)) {
        throw Error(ErrorCode::InvalidArgument, "region needs 0 <= start < end");
    }
}

} // namespace

SessionState add_region(const SessionState& state, const Region& region) {
    check_bounds(region);
    if (state.region_states.count(region.id)) {
        throw Error(ErrorCode::InvalidArgument, "region already exists: " + region.id);
    }
    SessionState next = state;
    Region r = region;
    r.source = RegionSource::User;
    r.state = LearnState::ToLearn;
    next.user_regions.push_back(r);
    next.region_states[r.id] = LearnState::ToLearn;
    ++next.revision;
    return next;
}

SessionState update_region(const SessionState& state, const Region& region) {
    check_bounds(region);
    auto it = state.region_states.find(region.id);
    if (it == state.region_states.end()) throw Error(ErrorCode::NotFound, "unknown region: " + region.id);
    SessionState next = state;
    Region r = region;
    r.source = RegionSource::User;
    r.state = it->second;
    auto u = std::find_if(next.user_regions.begin(), next.user_regions.end(),
                          [&](const Region& x) { return x.id == region.id; });
    if (u == next.user_regions.end()) {
        next.user_regions.push_back(r);
    } else {
        *u = r;
    }
    ++next.revision;
    return next;
}

SessionState remove_region(const SessionState& state, const std::string& region_id) {
    if (!state.region_states.count(region_id)) throw Error(ErrorCode::NotFound, "unknown region: " + region_id);
    SessionState next = state;
    next.region_states.erase(region_id);
    next.user_regions.erase(std::remove_if(next.user_regions.begin(), next.user_regions.end(),
                                           [&](const Region& r) { return r.id == region_id; }),
                            next.user_regions.end());
    ++next.revision;
    return next;
}

ProgressionSummary progression_summary(const SessionState& state, const std::vector<Region>& regions) {
    ProgressionSummary s;
    for (const auto& r : regions) {
        auto it = state.region_states.find(r.id);
        const LearnState st = it == state.region_states.end() ? LearnState::ToLearn : it->second;
        switch (st) {
        case LearnState::ToLearn: ++s.to_learn; break;
        case LearnState::Started: ++s.started; break;
        case LearnState::Aced: ++s.aced; break;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// SessionStore
// ---------------------------------------------------------------------------

namespace {

void check_path_component(const std::string& s, const char* what) {
    const bool ok = !s.empty() && s != "." && s != ".." &&
                    std::all_of(s.begin(), s.end(), [](char c) {
                        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                    });
    if (!ok) throw Error(ErrorCode::InvalidArgument, std::string("invalid ") + what + ": " + s);
}

std::optional<SessionState> read_state(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str()).get<SessionState>();
    } catch (const std::exception& e) {
        throw Error(ErrorCode::CorruptSession, path.string() + ": " + e.what());
    }
}

} // namespace

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {}

fs::path SessionStore::path_for(const std::string& lesson_id, const std::string& user_id) const {
    check_path_component(lesson_id, "lesson id");
    check_path_component(user_id, "user id");
    return root_ / "sessions" / lesson_id / (user_id + ".json");
}

SessionState SessionStore::load(const std::string& lesson_id, const std::string& user_id,
                                const std::vector<std::string>& region_ids) const {
    const auto path = path_for(lesson_id, user_id);
    std::lock_guard lock(mutex_);
    auto stored = read_state(path);
    if (!stored) return fresh_session(lesson_id, user_id, region_ids);
    if (stored->lesson_id != lesson_id || stored->user_id != user_id) {
        throw Error(ErrorCode::CorruptSession, path.string() + ": identity does not match its location");
    }
    for (const auto& id : region_ids) stored->region_states.try_emplace(id, LearnState::ToLearn);
    return *stored;
}

void SessionStore::save(const SessionState& state) {
    const auto path = path_for(state.lesson_id, state.user_id);
    std::lock_guard lock(mutex_);
    std::optional<SessionState> stored;
    try {
        stored = read_state(path);
    } catch (const Error&) {
        stored.reset();  // a corrupt document is replaced
    }
    const std::uint64_t current = stored ? stored->revision : 0;
    if (current >= state.revision) {
        throw Error(ErrorCode::Conflict, "session revision " + std::to_string(state.revision) +
                                             " is not newer than stored revision " + std::to_string(current));
    }

    write_file_atomic(path, json(state).dump(2));
}

} // namespace lessonlab
