#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mixsig {

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// see a partial file. Throws std::runtime_error naming the path on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole file as bytes. Throws std::runtime_error naming the path on failure.
std::string read_file(const std::filesystem::path& path);

}  // namespace mixsig
