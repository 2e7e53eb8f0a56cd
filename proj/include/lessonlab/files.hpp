#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lessonlab {

/// Writes to a sibling temporary file and renames it over `path`. Creates
/// parent directories. Throws Io.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Throws Io when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

} // namespace lessonlab
