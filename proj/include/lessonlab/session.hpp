#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lessonlab/region.hpp"
#include "lessonlab/scoring.hpp"

namespace lessonlab {

struct PracticeCounters {
    std::uint64_t played = 0;
    std::uint64_t looped = 0;
    std::uint64_t recorded = 0;
    std::uint64_t aced = 0;

    bool operator==(const PracticeCounters&) const = default;
};

struct ScoreRecord {
    ScoreReport report;
    double playback_speed = 1.0;
};

struct SessionState {
    std::string lesson_id;
    std::string user_id;
    std::map<std::string, LearnState> region_states;
    /// Kept for deleted regions too; hidden while the region is absent.
    std::map<std::string, PracticeCounters> history;
    std::map<std::string, std::vector<ScoreRecord>> scores;
    std::vector<Region> user_regions;
    std::uint64_t revision = 0;
};

enum class EventKind { Entered, Played, Looped, Recorded, ScoreOverridden };

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct SessionEvent {
    EventKind kind = EventKind::Entered;
    /// Present for Recorded and ScoreOverridden.
    std::optional<ScoreRecord> attempt;

    static SessionEvent entered() { return {EventKind::Entered, std::nullopt}; }
    static SessionEvent played() { return {EventKind::Played, std::nullopt}; }
    static SessionEvent looped() { return {EventKind::Looped, std::nullopt}; }
    static SessionEvent recorded(ScoreReport report, double playback_speed = 1.0) {
        return {EventKind::Recorded, ScoreRecord{std::move(report), playback_speed}};
    }
    static SessionEvent score_overridden(ScoreReport report) {
        return {EventKind::ScoreOverridden, ScoreRecord{std::move(report), 1.0}};
    }
};

SessionState fresh_session(std::string lesson_id, std::string user_id, const std::vector<std::string>& region_ids);

/// Applies one event and bumps the revision. to_learn becomes started on any event; an event with
/// an effective score of exactly 100 then makes the region aced, which is
/// absorbing. Throws NotFound for unknown regions.
SessionState transition(const SessionState& state, const std::string& region_id, const SessionEvent& event);

SessionState add_region(const SessionState& state, const Region& region);
/// Records the new bounds of a user-edited region (auto regions become user regions once edited).
SessionState update_region(const SessionState& state, const Region& region);
SessionState remove_region(const SessionState& state, const std::string& region_id);

struct ProgressionSummary {
    std::size_t to_learn = 0;
    std::size_t started = 0;
    std::size_t aced = 0;

    std::size_t total() const { return to_learn + started + aced; }
    bool operator==(const ProgressionSummary&) const = default;
};

ProgressionSummary progression_summary(const SessionState& state, const std::vector<Region>& regions);

/// One JSON document per (lesson, user) at root/sessions/<lesson>/<user>.json
/// with optimistic concurrency on `revision`.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    std::filesystem::path path_for(const std::string& lesson_id, const std::string& user_id) const;

    /// Missing documents yield a fresh state over `region_ids`. Regions in
    /// `region_ids` unknown to a stored session are reported as to_learn.
    /// Throws CorruptSession.
    SessionState load(const std::string& lesson_id, const std::string& user_id,
                      const std::vector<std::string>& region_ids) const;

    /// Throws Conflict when the stored revision is >= state.revision.
    void save(const SessionState& state);

private:
    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

} // namespace lessonlab
