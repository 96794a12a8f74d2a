#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace geocurate {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
    bool operator==(const LatLon&) const = default;
};

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(LatLon a, LatLon b);

/// Closed ring: front() == back().
using Ring = std::vector<LatLon>;

struct LatLonBox {
    double lat_min = 0.0, lat_max = 0.0, lon_min = 0.0, lon_max = 0.0;
    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
};

/// rings[0] is the outer ring, the rest are holes. After loading, every vertex
/// lies within [-180, 180] longitude.
struct Polygon {
    std::vector<Ring> rings;
    LatLonBox bbox;
};

struct Country {
    std::string code;
    std::vector<Polygon> polygons;
    LatLon centroid;
};

/// Input geometry for one country: polygons of rings, vertices in degrees.
/// Longitudes may wrap across +-180 between consecutive vertices.
struct CountryFeature {
    std::string code;
    std::vector<std::vector<Ring>> polygons;
};

/// Country boundaries with a bounding-box R-tree. Immutable after construction.
class CountryPolygonSet {
public:
    CountryPolygonSet();
    ~CountryPolygonSet();
    CountryPolygonSet(CountryPolygonSet&&) noexcept;
    CountryPolygonSet& operator=(CountryPolygonSet&&) noexcept;

    /// Closes rings (endpoints within 1e-9 degrees snap shut, others are an error),
    /// splits polygons at the antimeridian and computes bboxes and centroids.
    static CountryPolygonSet build(std::vector<CountryFeature> features);

    /// GeoJSON FeatureCollection of Polygon/MultiPolygon features; the country code is
    /// read from properties "code", "iso_a2" or "ISO_A2".
    static CountryPolygonSet from_geojson(const nlohmann::json& doc);

    /// Countries sorted by code.
    const std::vector<Country>& countries() const { return countries_; }
    const Country* find(std::string_view code) const;
    std::vector<std::string> codes() const;

    struct Candidate {
        std::size_t country;
        std::size_t polygon;
    };
    /// Polygons whose bbox contains the point, ordered by country code then polygon index.
    std::vector<Candidate> candidates(double lat, double lon) const;

private:
    struct Index;
    std::vector<Country> countries_;
    std::unique_ptr<Index> index_;
};

CountryPolygonSet load_boundaries(const std::filesystem::path& path);

/// Even-odd ray casting in planar (lon, lat). Boundary points count as inside; edges use
/// the half-open rule on latitude so shared vertices are counted once.
bool point_in_polygon(double lat, double lon, const Polygon& polygon);

/// First containing polygon wins (bbox prefilter, then code order). Otherwise the country
/// with the nearest centroid within fallback_km, else nullopt.
std::optional<std::string> assign_country(double lat, double lon, const CountryPolygonSet& set,
                                          double fallback_km = 25.0);

/// Area-weighted planar centroid of a set of rings (holes subtract). Rings are used as
/// given; longitude is not normalised.
LatLon rings_centroid(const std::vector<Ring>& outer_and_holes);

}  // namespace geocurate
