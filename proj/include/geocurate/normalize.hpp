#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geocurate/error.hpp"
#include "geocurate/filters.hpp"
#include "geocurate/manifest.hpp"

namespace geocurate {

struct ImageSize {
    int width = 0;
    int height = 0;
    bool operator==(const ImageSize&) const = default;
};

struct ResizePlan {
    ImageSize source;
    ImageSize target;
    bool resized = false;
};

inline constexpr int kStorageMinDimension = 640;
inline constexpr int kJpegQuality = 75;
inline constexpr std::string_view kResampleKernel = "bicubic";

/// `value * numerator / denominator` rounded half-up, in exact integer arithmetic.
int scale_round_half_up(int value, int numerator, int denominator);

/// Shrinks so the smaller side equals `limit` when it is strictly larger; otherwise
/// leaves the size alone.
ResizePlan target_dimensions(int width, int height, int limit = kStorageMinDimension);

class ImageDecodeError : public Error {
public:
    using Error::Error;
};

using Bytes = std::vector<std::uint8_t>;

/// Size after EXIF orientation is applied.
ImageSize probe_dimensions(std::span<const std::uint8_t> encoded);

/// Fixed-stride grid sample of at least `min_samples` pixels (all pixels for small images).
PixelSample sample_pixels(std::span<const std::uint8_t> encoded, std::size_t min_samples = 1000);

/// Decodes (JPEG or PNG), applies EXIF orientation, resizes to plan.target with a bicubic
/// kernel and re-encodes as baseline JPEG with 4:2:0 chroma and no metadata. A plan whose
/// source is the transposed decoded size (rotated by EXIF) is transposed to match.
Bytes transcode(std::span<const std::uint8_t> encoded, const ResizePlan& plan, int quality = kJpegQuality);

Bytes read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

struct NormalizeResult {
    std::size_t written = 0;
    std::size_t resized = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // id, message
};

/// Re-encodes every record that is not rejected. Sources resolve against `image_dir` unless
/// absolute; outputs go to `out_dir/<id>.jpg`, and the records take the new size and path.
NormalizeResult normalize_batch(Manifest& manifest, const std::filesystem::path& image_dir,
                                const std::filesystem::path& out_dir, unsigned workers = 1,
                                int limit = kStorageMinDimension, int quality = kJpegQuality);

}  // namespace geocurate
