#include "lessonlab/error.hpp"

namespace lessonlab {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Format: return "format";
        case ErrorCode::UnsupportedFormat: return "unsupported-format";
        case ErrorCode::EmptyInput: return "empty-input";
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::StemMismatch: return "stem-mismatch";
        case ErrorCode::SeparatorFailed: return "separator-failed";
        case ErrorCode::SeparatorOutputMissing: return "separator-output-missing";
        case ErrorCode::Config: return "config";
        case ErrorCode::DegenerateProfile: return "degenerate-profile";
        case ErrorCode::WrongTrack: return "wrong-track";
        case ErrorCode::EmptyTarget: return "empty-target";
        case ErrorCode::EmptyQuery: return "empty-query";
        case ErrorCode::NotFound: return "not-found";
        case ErrorCode::CorruptSession: return "corrupt-session";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

} // namespace lessonlab
