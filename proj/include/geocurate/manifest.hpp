#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace geocurate {

enum class Source { flickr, mapillary, unsplash };
enum class Split { train, val, test };
enum class Status { raw, kept, rejected };
enum class RejectionReason { date, grey, non_urban, blacklisted_scene, face_area, unassignable_gps };

std::string_view to_string(Source s);
std::string_view to_string(Split s);
std::string_view to_string(Status s);
std::string_view to_string(RejectionReason r);

std::optional<Source> parse_source(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
std::optional<Status> parse_status(std::string_view s);
std::optional<RejectionReason> parse_rejection_reason(std::string_view s);

/// Calendar date without time zone.
struct Date {
    int year = 0;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;
    std::string iso() const;
};

/// Accepts "YYYY-MM-DD", optionally followed by a 'T' or ' ' and a time part which is dropped.
std::optional<Date> parse_iso_date(std::string_view text);

/// One geo-tagged image plus its pipeline state.
struct ImageRecord {
    std::string id;
    Source source = Source::flickr;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<Date> captured_at;
    int width = 0;
    int height = 0;
    std::optional<bool> is_color;
    std::optional<std::string> country_code;
    std::optional<int> class_id;
    std::optional<Split> split;
    Status status = Status::raw;
    std::optional<RejectionReason> rejection_reason;
    std::string path;
    // Keys this version does not know about; written back untouched.
    nlohmann::json extra = nlohmann::json::object();

    void reject(RejectionReason reason) {
        status = Status::rejected;
        rejection_reason = reason;
    }
};

/// Lowercase hex of a 128-bit BLAKE2b digest over (source, native id).
std::string record_id(Source source, std::string_view native_id);

bool is_country_code(std::string_view code);

/// Throws ValidationError naming the first field that breaks an ImageRecord invariant.
void validate_record(const ImageRecord& record);

/// Parses one manifest line (a JSON object). `line_no` only decorates errors.
ImageRecord parse_record(std::string_view line, std::size_t line_no = 0);

/// Canonical form: compact JSON, keys sorted, absent optionals omitted.
std::string serialize_record(const ImageRecord& record);

struct ManifestStats {
    std::size_t total = 0;
    std::map<std::string, std::size_t> per_source;
    std::map<std::string, std::size_t> per_country;
    std::map<int, std::size_t> per_class;
    std::map<std::string, std::size_t> per_split;
    std::map<std::string, std::size_t> per_status;

    void add(const ImageRecord& record);
    /// Associative and commutative, so partial tallies combine in any grouping.
    ManifestStats& merge(const ManifestStats& other);
    bool operator==(const ManifestStats&) const = default;
    nlohmann::json to_json() const;
};

ManifestStats tally(std::span<const ImageRecord> records);

/// Tallies the records; throws DuplicateIdError listing every repeated id.
ManifestStats validate_manifest(std::span<const ImageRecord> records);

/// A manifest file: '#' header lines followed by one record per line.
struct Manifest {
    std::vector<std::string> header;
    std::vector<ImageRecord> records;

    /// Replaces any header line starting with `key + ":"`, else appends one.
    void set_header(std::string_view key, std::string_view value);
    std::optional<std::string> header_value(std::string_view key) const;
};

Manifest read_manifest(std::istream& in);
Manifest read_manifest(const std::filesystem::path& path);

/// Writes header then records sorted by id.
void write_manifest(std::ostream& out, const Manifest& manifest);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace geocurate
