#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "geocurate/dataset_ops.hpp"
#include "geocurate/eval.hpp"
#include "geocurate/error.hpp"
#include "geocurate/filters.hpp"

namespace geocurate {

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct PipelineConfig {
    struct Paths {
        std::optional<std::filesystem::path> cities, keywords, boundaries, taxonomy, blacklist, grouping, images;
    } paths;

    FilterConfig filter;
    double fallback_km = 25.0;
    std::int64_t min_population = 1000;
    double bbox_half_width_km = 10.0;

    SplitConfig split;
    FusionStrategy fusion = FusionStrategy::average;
    int num_classes = 61;
    std::uint64_t min_images = 0;
    unsigned workers = 0;  // 0 = hardware concurrency

    /// Throws ConfigError naming the first field out of range or file that is missing.
    void validate() const;
};

/// YAML config. Relative paths resolve against the config file's directory; unknown keys
/// are an error.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});

}  // namespace geocurate
