#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lessonlab {

enum class ErrorCode {
    Format,
    UnsupportedFormat,
    EmptyInput,
    InvalidArgument,
    StemMismatch,
    SeparatorFailed,
    SeparatorOutputMissing,
    Config,
    DegenerateProfile,
    WrongTrack,
    EmptyTarget,
    EmptyQuery,
    NotFound,
    CorruptSession,
    Conflict,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// that the server and CLI can map it to a status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace lessonlab
