#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geocurate {

struct City {
    std::string name;
    std::string country_code;
    double lat = 0.0;
    double lon = 0.0;
    std::int64_t population = 0;
};

/// Closed box in degrees. Boxes never cross the antimeridian; bbox_around splits instead.
struct GeoBBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
    double area_deg2() const { return (lat_max - lat_min) * (lon_max - lon_min); }
};

/// Tab-separated rows: name, country_code, lat, lon, population. Blank lines and lines
/// starting with '#' are skipped. Keeps cities with population >= min_population.
std::vector<City> load_city_table(std::istream& in, std::int64_t min_population = 1000);
std::vector<City> load_city_table(const std::filesystem::path& path, std::int64_t min_population = 1000);

/// One keyword per line; blank lines and '#' comments skipped.
std::vector<std::string> load_keywords(std::istream& in);
std::vector<std::string> load_keywords(const std::filesystem::path& path);

struct QueryCounts {
    std::uint64_t raw = 0;
    std::uint64_t deduplicated = 0;
};

std::string make_query(const City& city, std::string_view keyword);

/// Streams "{city} {keyword}" for every city (outer) and keyword (inner). With `dedup`,
/// exact-duplicate strings are emitted once, in first-seen order.
QueryCounts generate_keyword_queries(std::span<const City> cities, std::span<const std::string> keywords,
                                     const std::function<void(const std::string&)>& sink, bool dedup = true);

/// Counting mode: raw = |cities| * |keywords| without materialising strings.
std::uint64_t count_keyword_queries(std::span<const City> cities, std::span<const std::string> keywords);

/// Box of +-half_width_km around a point on a spherical earth (R = 6371 km). The longitude
/// half-width uses the latitude clamped to +-85 degrees. Returns two boxes when the box
/// wraps the antimeridian, one otherwise.
std::vector<GeoBBox> bbox_around(double lat, double lon, double half_width_km);

/// Latitude half-width in degrees for a distance in km.
double lat_delta_deg(double half_width_km);

}  // namespace geocurate
