#include "lessonlab/region.hpp"

namespace lessonlab {

std::string_view to_string(Track t) {
    return t == Track::Voice ? "voice" : "instrument";
}

std::string_view to_string(RegionSource s) {
    return s == RegionSource::Auto ? "auto" : "user";
}

std::string_view to_string(LearnState s) {
    switch (s) {
        case LearnState::ToLearn: return "to_learn";
        case LearnState::Started: return "started";
        case LearnState::Aced: return "aced";
    }
    return "to_learn";
}

std::optional<Track> parse_track(std::string_view s) {
    if (s == "voice") return Track::Voice;
    if (s == "instrument") return Track::Instrument;
    return std::nullopt;
}

std::optional<RegionSource> parse_region_source(std::string_view s) {
    if (s == "auto") return RegionSource::Auto;
    if (s == "user") return RegionSource::User;
    return std::nullopt;
}

std::optional<LearnState> parse_learn_state(std::string_view s) {
    if (s == "to_learn") return LearnState::ToLearn;
    if (s == "started") return LearnState::Started;
    if (s == "aced") return LearnState::Aced;
    return std::nullopt;
}

} // namespace lessonlab
