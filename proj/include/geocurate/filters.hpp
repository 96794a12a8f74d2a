#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocurate/error.hpp"
#include "geocurate/manifest.hpp"

namespace geocurate {

enum class SuperCategory { indoor, natural, urban };

struct SceneCategory {
    int id = 0;
    std::string name;
    SuperCategory super = SuperCategory::indoor;
};

class SceneTaxonomy {
public:
    SceneTaxonomy() = default;
    explicit SceneTaxonomy(std::vector<SceneCategory> categories);

    /// Tab-separated "id name super-category" rows; '#' comments.
    static SceneTaxonomy load(std::istream& in);
    static SceneTaxonomy load(const std::filesystem::path& path);

    /// One category name or numeric id per line. Unknown entries are an error.
    void load_blacklist(std::istream& in);
    void load_blacklist(const std::filesystem::path& path);
    void set_blacklist(std::set<int> ids);

    std::size_t size() const { return categories_.size(); }
    const SceneCategory* find(int id) const;
    std::optional<int> find_by_name(std::string_view name) const;
    /// Throws Error for an unknown id.
    const SceneCategory& at(int id) const;
    bool is_blacklisted(int id) const { return blacklist_.contains(id); }
    const std::set<int>& blacklist() const { return blacklist_; }

private:
    std::vector<SceneCategory> categories_;
    std::unordered_map<int, std::size_t> by_id_;
    std::set<int> blacklist_;
};

struct ScenePrediction {
    int category = 0;
    double probability = 0.0;
};

/// Axis-aligned face box in pixels: top-left corner plus size.
struct FaceBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
};

/// Scorer outputs for one image. Absent members mean the scorer has not produced them.
struct FilterEvidence {
    std::string id;
    std::optional<std::vector<ScenePrediction>> scene_top5;
    std::optional<std::vector<FaceBox>> face_boxes;
    std::optional<bool> is_grey;
    std::optional<std::string> decode_error;
};

/// Throws ValidationError: at most 5 predictions, probabilities in [0,1], sorted descending.
void validate_evidence(const FilterEvidence& evidence);

struct GreyConfig {
    int max_channel_diff = 8;
    double min_grey_fraction = 0.995;
    std::size_t min_samples = 1000;
};

struct FilterConfig {
    double urban_threshold = 0.5;
    double blacklist_threshold = 0.5;
    double face_threshold = 0.10;
    int cutoff_year = 2012;
    GreyConfig grey;
    bool date_stage = true;
    bool grey_stage = true;
    bool scene_stage = true;
    bool face_stage = true;
};

struct FilterOutcome {
    std::string id;
    bool kept = false;
    std::optional<RejectionReason> reason;
    double urban_probability = 0.0;
    double face_ratio = 0.0;
    bool date_unknown = false;
};

/// A stage had no evidence for the image; the record belongs in the needs-evidence queue.
class MissingEvidenceError : public Error {
public:
    MissingEvidenceError(std::string id, std::string stage)
        : Error(id + ": no " + stage + " evidence"), id_(std::move(id)), stage_(std::move(stage)) {}
    const std::string& id() const { return id_; }
    const std::string& stage() const { return stage_; }

private:
    std::string id_, stage_;
};

/// The scorer could not decode the image.
class DecodeError : public Error {
public:
    DecodeError(std::string id, const std::string& detail)
        : Error(id + ": decode error: " + detail), id_(std::move(id)) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

/// Sum of the probabilities whose category is urban. Throws Error for unknown ids.
double urban_score(std::span<const ScenePrediction> top5, const SceneTaxonomy& taxonomy);

struct StageDecision {
    bool pass = true;
    std::optional<RejectionReason> reason;
};

/// non_urban when urban_score <= urban_threshold; blacklisted_scene when the top-1
/// category is blacklisted with probability >= blacklist_threshold.
StageDecision scene_filter(const FilterEvidence& evidence, const SceneTaxonomy& taxonomy, double urban_threshold,
                           double blacklist_threshold);

/// Pixels from a fixed-stride grid. channels == 1 means a single-channel image.
struct PixelSample {
    int channels = 3;
    std::vector<std::array<std::uint8_t, 3>> pixels;
};

/// Grey iff single-channel, or at least min_grey_fraction of the sampled pixels have every
/// pairwise channel difference <= max_channel_diff.
bool grey_filter(const PixelSample& sample, const GreyConfig& config = {});

struct DateDecision {
    bool pass = true;
    bool date_unknown = false;
};

/// Rejects captures before cutoff_year-01-01. Missing dates pass and are flagged.
DateDecision date_filter(const ImageRecord& record, int cutoff_year);

/// Exact union area of the boxes (clamped to the image) over width * height.
double face_ratio(std::span<const FaceBox> boxes, int width, int height);

/// Stages run date -> grey -> scene -> face; the first failure sets the reason.
/// Throws MissingEvidenceError or DecodeError carrying the image id.
FilterOutcome run_cascade(const ImageRecord& record, const FilterEvidence& evidence, const FilterConfig& config,
                          const SceneTaxonomy& taxonomy);

struct FilterStats {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::map<std::string, std::size_t> rejected;  // every reason present, zero or not
    std::size_t date_unknown = 0;
    std::size_t needs_evidence = 0;
    std::size_t decode_errors = 0;

    FilterStats();
    std::size_t rejected_total() const;
    FilterStats& merge(const FilterStats& other);
    bool operator==(const FilterStats&) const = default;
    nlohmann::json to_json() const;
};

FilterStats cascade_report(std::span<const FilterOutcome> outcomes);

/// Evidence keyed by image id, merged from any number of evidence files.
class EvidenceStore {
public:
    struct ReadResult {
        std::size_t rows = 0;
        std::vector<std::string> warnings;
    };

    /// JSON lines with "id" plus any of "scene_top5" ([[category, probability], ...]),
    /// "faces" ([[x, y, w, h], ...]), "is_grey" (bool) or "error" (string).
    /// Unknown keys are warnings; malformed rows and invariant violations throw.
    ReadResult read(std::istream& in);
    ReadResult read(const std::filesystem::path& path);

    void put(FilterEvidence evidence);
    const FilterEvidence* find(const std::string& id) const;
    std::size_t size() const { return by_id_.size(); }

private:
    std::unordered_map<std::string, FilterEvidence> by_id_;
};

struct CascadeBatch {
    std::vector<FilterOutcome> outcomes;      // input order
    std::vector<std::string> needs_evidence;  // sorted ids
    std::vector<std::pair<std::string, std::string>> decode_errors;
    FilterStats stats;
};

/// Runs the cascade over every record not already rejected, in parallel.
CascadeBatch run_cascade_batch(std::span<const ImageRecord> records, const EvidenceStore& evidence,
                               const FilterConfig& config, const SceneTaxonomy& taxonomy, unsigned workers = 1);

}  // namespace geocurate
