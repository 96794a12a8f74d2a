#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "geocurate/error.hpp"
#include "geocurate/geo.hpp"
#include "test_support.hpp"

using namespace geocurate;

namespace {

Ring closed(std::vector<LatLon> pts) {
    pts.push_back(pts.front());
    return pts;
}

Ring star(std::mt19937_64& rng, LatLon c, int spikes, double r_in, double r_out) {
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    std::vector<LatLon> pts;
    for (int i = 0; i < 2 * spikes; ++i) {
        const double a = std::numbers::pi * i / spikes;
        const double r = (i % 2 ? r_in : r_out) * jitter(rng);
        pts.push_back({c.lat + r * std::sin(a), c.lon + r * std::cos(a)});
    }
    return closed(pts);
}

// Winding number in the (lon, lat) plane; nonzero means inside.
int winding(const Ring& ring, double lat, double lon) {
    int wn = 0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[i + 1];
        const double cross = (b.lon - a.lon) * (lat - a.lat) - (lon - a.lon) * (b.lat - a.lat);
        if (a.lat <= lat) {
            if (b.lat > lat && cross > 0) ++wn;
        } else if (b.lat <= lat && cross < 0) {
            --wn;
        }
    }
    return wn;
}

// Triangle fan from vertex 0, summed by hand.
LatLon fan_centroid(const Ring& r) {
    double area = 0, cx = 0, cy = 0;
    for (std::size_t i = 1; i + 2 < r.size(); ++i) {
        const double x0 = r[0].lon, y0 = r[0].lat, x1 = r[i].lon, y1 = r[i].lat, x2 = r[i + 1].lon,
                     y2 = r[i + 1].lat;
        const double a = ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)) / 2;
        area += a;
        cx += a * (x0 + x1 + x2) / 3;
        cy += a * (y0 + y1 + y2) / 3;
    }
    return {cy / area, cx / area};
}

Polygon make_polygon(std::vector<Ring> rings) {
    auto set = CountryPolygonSet::build({{"ZZ", {std::move(rings)}}});
    return set.countries().at(0).polygons.at(0);
}

}  // namespace

TEST(Haversine, HalfCircumference) {
    EXPECT_NEAR(haversine_km({0, 0}, {0, 180}), std::numbers::pi * 6371.0, 1e-9);
    EXPECT_NEAR(haversine_km({0, 0}, {0, 180}), 20015.09, 0.01);
    EXPECT_NEAR(haversine_km({90, 0}, {-90, 0}), 20015.09, 0.01);
    EXPECT_DOUBLE_EQ(haversine_km({12.5, 41.9}, {12.5, 41.9}), 0.0);
    EXPECT_NEAR(haversine_km({0, 179.5}, {0, -179.5}), haversine_km({0, 0}, {0, 1}), 1e-9);
}

TEST(PointInPolygon, AgreesWithWindingOracleOnStars) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int p = 0; p < 20; ++p) {
        const LatLon c{u(rng) * 40, u(rng) * 120};
        const auto ring = star(rng, c, 5 + p % 6, 1.0, 3.0);
        const auto poly = make_polygon({ring});
        for (int i = 0; i < 2000; ++i) {
            const double lat = c.lat + u(rng) * 3.8, lon = c.lon + u(rng) * 3.8;
            ASSERT_EQ(point_in_polygon(lat, lon, poly), winding(ring, lat, lon) != 0) << p << " " << lat << " " << lon;
        }
    }
}

TEST(PointInPolygon, BoundaryCountsAsInside) {
    const auto poly = make_polygon({closed({{0, 0}, {0, 10}, {10, 10}, {10, 0}})});
    EXPECT_TRUE(point_in_polygon(0, 5, poly));
    EXPECT_TRUE(point_in_polygon(10, 10, poly));
    EXPECT_TRUE(point_in_polygon(5, 10, poly));
    EXPECT_FALSE(point_in_polygon(5, 10.000001, poly));
}

TEST(PointInPolygon, HolesExclude) {
    const auto poly =
        make_polygon({closed({{0, 0}, {0, 10}, {10, 10}, {10, 0}}), closed({{4, 4}, {6, 4}, {6, 6}, {4, 6}})});
    EXPECT_TRUE(point_in_polygon(2, 2, poly));
    EXPECT_FALSE(point_in_polygon(5, 5, poly));
    EXPECT_TRUE(point_in_polygon(4, 5, poly));  // hole edge is still the boundary
}

TEST(Centroid, MatchesTriangleFan) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        const auto ring = star(rng, {10.0 + i, -50.0 + 3 * i}, 4 + i % 5, 0.5, 2.0);
        const auto got = rings_centroid({ring});
        const auto want = fan_centroid(ring);
        EXPECT_NEAR(got.lat, want.lat, 1e-9);
        EXPECT_NEAR(got.lon, want.lon, 1e-9);
    }
}

TEST(Centroid, HoleShiftsIt) {
    // 10x10 square minus the 5x5 upper-right quarter: L shape, three 5x5 squares, centroid at 25/6 in each axis
    const auto c = rings_centroid({closed({{0, 0}, {0, 10}, {10, 10}, {10, 0}}), closed({{5, 5}, {5, 10}, {10, 10}, {10, 5}})});
    EXPECT_NEAR(c.lat, 25.0 / 6.0, 1e-12);
    EXPECT_NEAR(c.lon, 25.0 / 6.0, 1e-12);
}

TEST(Boundaries, UnclosedRingIsRejected) {
    std::vector<Ring> open{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
    EXPECT_THROW(CountryPolygonSet::build({{"ZZ", {open}}}), ValidationError);
    std::vector<Ring> nearly{{{0, 0}, {0, 1}, {1, 1}, {1, 0}, {1e-12, 0}}};
    EXPECT_NO_THROW(CountryPolygonSet::build({{"ZZ", {nearly}}}));
}

TEST(Boundaries, DuplicateCodesAreRejected) {
    std::vector<Ring> sq{closed({{0, 0}, {0, 1}, {1, 1}, {1, 0}})};
    EXPECT_THROW(CountryPolygonSet::build({{"ZZ", {sq}}, {"ZZ", {sq}}}), Error);
}

TEST(Boundaries, AntimeridianPolygonIsSplit) {
    // 10 degrees wide across 180: [175, -175]
    std::vector<Ring> ring{closed({{-10, 175}, {-10, -175}, {10, -175}, {10, 175}})};
    auto set = CountryPolygonSet::build({{"FJ", {ring}}});
    const auto& c = set.countries().at(0);
    ASSERT_EQ(c.polygons.size(), 2u);
    for (const auto& p : c.polygons)
        for (const auto& v : p.rings[0]) {
            EXPECT_GE(v.lon, -180.0);
            EXPECT_LE(v.lon, 180.0);
        }
    for (double lon : {176.0, 179.999, -179.999, -176.0, 180.0 - 1e-9})
        EXPECT_EQ(assign_country(0.0, lon, set, 0.0), "FJ") << lon;
    EXPECT_EQ(assign_country(0.0, 0.0, set, 0.0), std::nullopt);
    EXPECT_EQ(assign_country(0.0, 170.0, set, 0.0), std::nullopt);
    EXPECT_NEAR(std::abs(c.centroid.lon), 180.0, 1e-9);
}

TEST(AssignCountry, FixtureCentroidsMapHome) {
    auto set = load_boundaries(support::fixtures_dir() / "boundaries.geojson");
    ASSERT_EQ(set.countries().size(), 10u);
    for (const auto& c : set.countries()) EXPECT_EQ(assign_country(c.centroid.lat, c.centroid.lon, set), c.code);
}

TEST(AssignCountry, EnclaveBeatsSurroundingCountry) {
    auto set = load_boundaries(support::fixtures_dir() / "boundaries.geojson");
    EXPECT_EQ(assign_country(41.90, 12.45, set), "VA");
    EXPECT_EQ(assign_country(41.85, 12.45, set), "IT");
    EXPECT_EQ(assign_country(20.5, -157.0, set), "US");  // second polygon of a multipolygon
    EXPECT_EQ(assign_country(-17.0, -179.0, set), "FJ");
    EXPECT_EQ(assign_country(-17.0, 178.0, set), "FJ");
}

TEST(AssignCountry, FallbackUsesCentroidDistance) {
    std::vector<Ring> sq{closed({{0, 0}, {0, 0.1}, {0.1, 0.1}, {0.1, 0}})};
    auto set = CountryPolygonSet::build({{"AA", {sq}}});
    // centroid (0.05, 0.05); a point 0.2 degrees east is ~16.7 km from it
    EXPECT_EQ(assign_country(0.05, 0.25, set, 25.0), "AA");
    EXPECT_EQ(assign_country(0.05, 0.25, set, 10.0), std::nullopt);
    EXPECT_EQ(assign_country(0.05, 1.5, set, 25.0), std::nullopt);
}

TEST(AssignCountry, SharedEdgeGoesToFirstCode) {
    std::vector<Ring> west{closed({{0, 0}, {0, 1}, {1, 1}, {1, 0}})};
    std::vector<Ring> east{closed({{0, 1}, {0, 2}, {1, 2}, {1, 1}})};
    auto set = CountryPolygonSet::build({{"BB", {east}}, {"AA", {west}}});
    EXPECT_EQ(assign_country(0.5, 1.0, set, 0.0), "AA");
}

TEST(Boundaries, GeoJsonNeedsACode) {
    auto doc = nlohmann::json::parse(R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
        "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]})");
    EXPECT_THROW(CountryPolygonSet::from_geojson(doc), Error);
    doc["features"][0]["properties"]["ISO_A2"] = "ZZ";
    EXPECT_EQ(CountryPolygonSet::from_geojson(doc).codes(), std::vector<std::string>{"ZZ"});
}
