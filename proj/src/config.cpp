#include "geocurate/config.hpp"

#include <set>

#include <yaml-cpp/yaml.h>

#include "geocurate/io.hpp"

namespace geocurate {

namespace {

void reject_unknown(const YAML::Node& node, const std::string& where, const std::set<std::string>& known) {
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!known.contains(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
}

template <typename T>
void read(const YAML::Node& node, const char* key, const std::string& field, T& out) {
    if (!node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(field, "wrong type");
    }
}

void check_range(double v, double lo, double hi, const std::string& field) {
    if (!(v >= lo && v <= hi))
        throw ConfigError(field, "must be within [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

void PipelineConfig::validate() const {
    check_range(filter.urban_threshold, 0.0, 1.0, "thresholds.urban");
    check_range(filter.blacklist_threshold, 0.0, 1.0, "thresholds.blacklist");
    check_range(filter.face_threshold, 0.0, 1.0, "thresholds.face");
    check_range(filter.grey.max_channel_diff, 0, 255, "thresholds.grey_channel_diff");
    check_range(filter.grey.min_grey_fraction, 0.0, 1.0, "thresholds.grey_fraction");
    check_range(filter.cutoff_year, 1800, 3000, "thresholds.cutoff_year");
    check_range(fallback_km, 0.0, 20100.0, "thresholds.fallback_km");
    if (min_population < 0) throw ConfigError("thresholds.min_population", "must be >= 0");
    if (!(bbox_half_width_km > 0.0)) throw ConfigError("bbox_half_width_km", "must be > 0");
    if (num_classes < 1) throw ConfigError("classes", "must be >= 1");
    if (split.ratios.denominator() == 0) throw ConfigError("split.ratios", "sum to zero");

    const std::pair<const char*, const std::optional<std::filesystem::path>*> files[] = {
        {"paths.cities", &paths.cities},         {"paths.keywords", &paths.keywords},
        {"paths.boundaries", &paths.boundaries}, {"paths.taxonomy", &paths.taxonomy},
        {"paths.blacklist", &paths.blacklist},   {"paths.grouping", &paths.grouping},
        {"paths.images", &paths.images}};
    for (const auto& [field, p] : files)
        if (*p && !std::filesystem::exists(**p)) throw ConfigError(field, "no such file: " + (*p)->string());
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("config", std::string("malformed YAML: ") + e.what());
    }
    PipelineConfig cfg;
    if (root.IsNull()) return cfg;
    if (!root.IsMap()) throw ConfigError("config", "top level must be a mapping");
    reject_unknown(root, "", {"paths", "thresholds", "split", "fusion", "classes", "min_images", "workers",
                              "bbox_half_width_km", "stages"});

    if (auto p = root["paths"]) {
        reject_unknown(p, "paths", {"cities", "keywords", "boundaries", "taxonomy", "blacklist", "grouping", "images"});
        auto path = [&](const char* key, std::optional<std::filesystem::path>& out) {
            if (!p[key]) return;
            std::filesystem::path v = p[key].as<std::string>();
            out = v.is_relative() && !base_dir.empty() ? base_dir / v : v;
        };
        path("cities", cfg.paths.cities);
        path("keywords", cfg.paths.keywords);
        path("boundaries", cfg.paths.boundaries);
        path("taxonomy", cfg.paths.taxonomy);
        path("blacklist", cfg.paths.blacklist);
        path("grouping", cfg.paths.grouping);
        path("images", cfg.paths.images);
    }
    if (auto t = root["thresholds"]) {
        reject_unknown(t, "thresholds", {"urban", "blacklist", "face", "cutoff_year", "grey_channel_diff",
                                         "grey_fraction", "grey_min_samples", "fallback_km", "min_population"});
        read(t, "urban", "thresholds.urban", cfg.filter.urban_threshold);
        read(t, "blacklist", "thresholds.blacklist", cfg.filter.blacklist_threshold);
        read(t, "face", "thresholds.face", cfg.filter.face_threshold);
        read(t, "cutoff_year", "thresholds.cutoff_year", cfg.filter.cutoff_year);
        read(t, "grey_channel_diff", "thresholds.grey_channel_diff", cfg.filter.grey.max_channel_diff);
        read(t, "grey_fraction", "thresholds.grey_fraction", cfg.filter.grey.min_grey_fraction);
        read(t, "grey_min_samples", "thresholds.grey_min_samples", cfg.filter.grey.min_samples);
        read(t, "fallback_km", "thresholds.fallback_km", cfg.fallback_km);
        read(t, "min_population", "thresholds.min_population", cfg.min_population);
    }
    if (auto s = root["stages"]) {
        reject_unknown(s, "stages", {"date", "grey", "scene", "face"});
        read(s, "date", "stages.date", cfg.filter.date_stage);
        read(s, "grey", "stages.grey", cfg.filter.grey_stage);
        read(s, "scene", "stages.scene", cfg.filter.scene_stage);
        read(s, "face", "stages.face", cfg.filter.face_stage);
    }
    if (auto s = root["split"]) {
        reject_unknown(s, "split", {"ratios", "seed"});
        if (s["ratios"]) {
            try {
                cfg.split.ratios = parse_split_ratios(s["ratios"].as<std::string>());
            } catch (const Error& e) {
                throw ConfigError("split.ratios", e.what());
            }
        }
        read(s, "seed", "split.seed", cfg.split.seed);
    }
    if (root["fusion"]) {
        auto f = parse_fusion_strategy(root["fusion"].as<std::string>());
        if (!f) throw ConfigError("fusion", "unknown strategy");
        cfg.fusion = *f;
    }
    read(root, "classes", "classes", cfg.num_classes);
    read(root, "min_images", "min_images", cfg.min_images);
    read(root, "workers", "workers", cfg.workers);
    read(root, "bbox_half_width_km", "bbox_half_width_km", cfg.bbox_half_width_km);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config", "no such file: " + path.string());
    return parse_config(read_file(path), path.parent_path());
}

}  // namespace geocurate
