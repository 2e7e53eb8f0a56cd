#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace lessonlab {

enum class Track { Voice, Instrument };
enum class RegionSource { Auto, User };

/// Ordered: to_learn < started < aced. Progress never moves backwards.
enum class LearnState { ToLearn = 0, Started = 1, Aced = 2 };

std::string_view to_string(Track t);
std::string_view to_string(RegionSource s);
std::string_view to_string(LearnState s);

std::optional<Track> parse_track(std::string_view s);
std::optional<RegionSource> parse_region_source(std::string_view s);
std::optional<LearnState> parse_learn_state(std::string_view s);

/// A practice unit on the lesson timeline, in seconds.
struct Region {
    std::string id;
    double start = 0.0;
    double end = 0.0;
    Track track = Track::Instrument;
    RegionSource source = RegionSource::Auto;
    LearnState state = LearnState::ToLearn;

    double length() const { return end - start; }
    bool operator==(const Region&) const = default;
};

} // namespace lessonlab
