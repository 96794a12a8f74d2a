#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "geocurate/manifest.hpp"
#include "geocurate/normalize.hpp"

namespace geocurate::support {

std::filesystem::path fixtures_dir();
std::filesystem::path data_dir();

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(std::string_view tag);

// Smooth colour gradient plus a seeded pattern; grey images keep R == G == B.
Bytes make_image(int width, int height, bool colour, std::uint32_t seed, std::string_view ext = ".jpg");

// One image per record at dir / record.path, sized as the record says.
void write_fixture_images(const Manifest& manifest, const std::filesystem::path& dir);

}  // namespace geocurate::support
