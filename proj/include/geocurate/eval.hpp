#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geocurate/geo.hpp"
#include "geocurate/grouping.hpp"
#include "geocurate/normalize.hpp"

namespace geocurate {

inline constexpr int kCropResizeMin = 256;
inline constexpr int kCropSize = 224;

enum class CropPosition { UL, UR, LL, LR, C };
inline constexpr std::array kCropOrder{CropPosition::UL, CropPosition::UR, CropPosition::LL, CropPosition::LR,
                                       CropPosition::C};
std::string_view to_string(CropPosition p);

struct CropRect {
    CropPosition position = CropPosition::UL;
    int x = 0;
    int y = 0;
    int width = kCropSize;
    int height = kCropSize;
};

/// Resize so the smaller side is 256 (free side rounded half-up), then four corner crops
/// and a centre crop of 224x224, in UL, UR, LL, LR, C order.
struct CropPlan {
    ImageSize resized;
    std::array<CropRect, 5> crops;
};

CropPlan crop_plan(int width, int height);
nlohmann::json to_json(const CropPlan& plan);

enum class FusionStrategy { average, max, single_UL, single_UR, single_LL, single_LR, single_C, resize224 };
std::string_view to_string(FusionStrategy s);
std::optional<FusionStrategy> parse_fusion_strategy(std::string_view s);
/// Row label for report tables ("Averaging", "Max fusion", ...).
std::string_view display_name(FusionStrategy s);

using ScoreVector = std::vector<double>;

struct FusedScore {
    ScoreVector scores;
    int predicted = 0;
};

/// Index of the largest value; ties go to the smallest index.
int argmax(std::span<const double> scores);

/// average: elementwise mean. max: elementwise max, so the argmax is the class holding the
/// single highest crop probability. single_*: that crop's vector. resize224: the one
/// whole-image vector. Throws Error when the vector count does not fit the strategy.
FusedScore fuse_scores(std::span<const ScoreVector> vectors, FusionStrategy strategy);

/// 1-based rank of `true_class` with ties broken by ascending class id.
int rank_of(std::span<const double> scores, int true_class);

/// Score vectors for one image: five crops (UL, UR, LL, LR, C) or one whole-image vector.
struct PredictionRecord {
    std::string id;
    int true_class = 0;
    std::vector<ScoreVector> vectors;
};

/// Ranked GPS hypotheses for one image, best first.
struct GpsPrediction {
    std::string id;
    int true_class = 0;
    std::vector<LatLon> hypotheses;
};

/// What the metrics need from one prediction. `rank` is absent when the true class is not
/// ranked at all (an unmappable GPS output), which counts as a miss for every k.
struct RankedOutcome {
    int true_class = 0;
    int predicted = -1;
    std::optional<int> rank;
};

std::vector<RankedOutcome> rank_predictions(std::span<const PredictionRecord> records, FusionStrategy strategy);

/// Fraction of outcomes ranked within the top k. Throws for k < 1 or k > num_classes.
double topk_accuracy(std::span<const RankedOutcome> outcomes, int k, int num_classes);
double topk_accuracy(std::span<const PredictionRecord> records, int k, FusionStrategy strategy);

/// Mean per-class recall over classes present in the ground truth. Throws on empty input.
double balanced_accuracy(std::span<const RankedOutcome> outcomes);

struct CoordsToClassResult {
    std::vector<RankedOutcome> outcomes;
    std::size_t unassigned = 0;  // images with no hypothesis mapping to any country
};

/// Maps each hypothesis to a country, then to a class; the class ranking is the order of
/// first appearance. Unassignable hypotheses are skipped.
CoordsToClassResult coords_to_class(std::span<const GpsPrediction> predictions, const CountryPolygonSet& boundaries,
                                    const ClassGrouping& grouping, double fallback_km = 25.0);

enum class PredictionLayout { five_crop, single, gps };
std::string_view to_string(PredictionLayout l);

/// Prediction file: a header object on the first line
///   {"header": {"num_classes": N, "layout": "five_crop" | "single" | "gps", ...}}
/// then one JSON object per image with "id", "true_class" and either "scores"
/// (5 x N or N probabilities) or "gps" ([[lat, lon], ...]).
struct PredictionFile {
    int num_classes = 0;
    PredictionLayout layout = PredictionLayout::five_crop;
    std::string method;  // optional row label
    std::optional<FusionStrategy> strategy;
    std::vector<PredictionRecord> records;
    std::vector<GpsPrediction> gps;
    std::vector<std::string> warnings;
};

inline constexpr double kProbabilitySumTolerance = 1e-5;

PredictionFile read_prediction_file(std::istream& in);
PredictionFile read_prediction_file(const std::filesystem::path& path);
void write_prediction_file(std::ostream& out, const PredictionFile& file);

struct MetricRow {
    std::string method;
    std::string set;
    std::size_t count = 0;
    std::map<int, std::optional<double>> topk;  // absent value when k > num_classes
    double balanced = 0.0;
    std::map<int, double> per_class_recall;
    std::map<int, std::map<int, std::size_t>> confusion;  // true -> predicted (-1 = none)
    std::size_t unassigned = 0;
};

MetricRow evaluate(std::string method, std::string set, std::span<const RankedOutcome> outcomes, int num_classes,
                   std::span<const int> ks);

struct EvalReport {
    std::vector<int> ks{1, 3, 5, 10};
    std::vector<MetricRow> rows;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& doc);
    /// Rows are methods, column groups are test sets, columns are Top-k and Bal.
    std::string table() const;
};

/// Adds the rows one prediction file yields: every crop strategy for five-crop files, one
/// row for single-vector and GPS files (GPS needs boundaries and grouping).
void add_rows(EvalReport& report, const std::string& set, const PredictionFile& file,
              const CountryPolygonSet* boundaries = nullptr, const ClassGrouping* grouping = nullptr,
              double fallback_km = 25.0);

}  // namespace geocurate
