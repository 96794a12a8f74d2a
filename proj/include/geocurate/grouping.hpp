#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geocurate/error.hpp"
#include "geocurate/geo.hpp"

namespace geocurate {

/// Partition of country codes into classes 0..K-1.
struct ClassGrouping {
    int num_classes = 0;
    std::map<std::string, int> assignment;
    std::vector<std::string> labels;  // indexed by class id
    std::string version;

    /// Member codes per class, sorted.
    std::vector<std::vector<std::string>> members() const;
};

class UnknownCountryError : public Error {
public:
    explicit UnknownCountryError(std::string code)
        : Error("country '" + code + "' is not in the grouping"), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

/// Throws ValidationError unless every class in [0, K) has a member and a label, and
/// every code in `required` (when given) is assigned.
void validate_grouping(const ClassGrouping& grouping, std::span<const std::string> required = {});

/// Lines "country_code class_id class_label" (label runs to end of line). A
/// "# version: <tag>" header line sets the version. K is max class id + 1.
ClassGrouping load_grouping(std::istream& in, std::span<const std::string> required = {});
ClassGrouping load_grouping(const std::filesystem::path& path, std::span<const std::string> required = {});
void write_grouping(std::ostream& out, const ClassGrouping& grouping);

int map_country_to_class(std::string_view code, const ClassGrouping& grouping);

struct CountryStat {
    std::string code;
    std::uint64_t count = 0;
    LatLon centroid;
};

struct MergeStep {
    std::string merged;  // smallest code of the group that was absorbed
    std::string into;    // smallest code of the receiving group
    double distance_km = 0.0;
    std::uint64_t min_count_before = 0;
    std::uint64_t min_count_after = 0;
};

struct GroupingTrace {
    std::vector<MergeStep> steps;
    std::vector<int> classes_below_min;  // final classes with fewer than min_images
};

/// Greedy agglomeration: starting from one group per country, repeatedly merge the group
/// with the fewest images (ties: smallest code) into the nearest other group, measured by
/// haversine distance between count-weighted centroids (ties: smallest code), until K groups
/// remain. Classes are numbered in order of their smallest member code.
ClassGrouping compute_grouping(std::span<const CountryStat> stats, int num_classes, std::uint64_t min_images = 0,
                               unsigned workers = 1, GroupingTrace* trace = nullptr);

}  // namespace geocurate
