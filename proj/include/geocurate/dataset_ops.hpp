#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "geocurate/manifest.hpp"

namespace geocurate {

/// Split proportions as integer parts of a common denominator (their sum), so the ratios
/// sum to one exactly.
struct SplitRatios {
    std::uint64_t train = 96;
    std::uint64_t val = 2;
    std::uint64_t test = 2;

    std::uint64_t denominator() const { return train + val + test; }
};

/// "0.96,0.02,0.02" (decimals that must sum to exactly 1) or "96:2:2" (parts).
SplitRatios parse_split_ratios(std::string_view text);

struct SplitConfig {
    SplitRatios ratios;
    std::uint64_t seed = 0;
};

struct SplitCounts {
    std::size_t train = 0, val = 0, test = 0;
    bool operator==(const SplitCounts&) const = default;
};

/// test = ceil(r_test * n), then val = ceil(r_val * n), each capped so train keeps at least
/// one record; train takes the rest.
SplitCounts split_counts(std::size_t n, const SplitRatios& ratios);

/// Assigns split labels per country. Within a country, ids are sorted, shuffled with a
/// generator seeded from (seed, country code), and handed out test, val, then train.
/// Every record needs a country_code.
void split_dataset(std::span<ImageRecord> records, const SplitConfig& config, unsigned workers = 1);

struct WeightEntry {
    int class_id = 0;
    std::uint64_t count = 0;
    double weight = 0.0;
};

/// Per-class loss weights 1/sqrt(n). Classes with no images are listed in `excluded`.
struct WeightTable {
    std::vector<WeightEntry> entries;  // ascending class id
    std::vector<int> excluded;

    std::size_t num_classes() const { return entries.size() + excluded.size(); }
    const WeightEntry* find(int class_id) const;
};

WeightTable class_weights(const std::map<int, std::uint64_t>& counts);

/// Scales weights so their mean is one. Not applied by default.
WeightTable rescale_mean_one(WeightTable table);

/// "class_id n_i w_i" lines under '#' header lines.
void write_weight_table(std::ostream& out, const WeightTable& table);
WeightTable read_weight_table(std::istream& in);

struct LossSample {
    std::vector<double> scores;  // probabilities over N classes
    int true_class = 0;
};

struct LossValue {
    double value = 0.0;
    bool clamped = false;  // some true-class probability was below kLossEpsilon
};

inline constexpr double kLossEpsilon = 1e-12;

void validate_loss_sample(const LossSample& sample);

/// -w_c * log(max(p_c, eps)) for the true class c.
LossValue weighted_ce(const LossSample& sample, const WeightTable& weights);
LossValue weighted_ce(std::span<const LossSample> batch, const WeightTable& weights);

}  // namespace geocurate
