#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

namespace geocurate {

/// Opens a file for reading or throws Error naming the path.
std::ifstream open_input(const std::filesystem::path& path);

/// Writes through `fill` into a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& fill);

std::string read_file(const std::filesystem::path& path);

/// Strips ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace geocurate
