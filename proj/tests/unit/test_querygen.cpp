#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "geocurate/error.hpp"
#include "geocurate/querygen.hpp"
#include "test_support.hpp"

using namespace geocurate;

TEST(CityTable, PopulationThreshold) {
    auto all = load_city_table(support::fixtures_dir() / "cities.tsv", 0);
    auto kept = load_city_table(support::fixtures_dir() / "cities.tsv");
    EXPECT_EQ(all.size(), 50u);
    EXPECT_EQ(kept.size(), 38u);
    for (const auto& c : kept) EXPECT_GE(c.population, 1000);
}

TEST(CityTable, BadRowReportsItsLine) {
    std::istringstream in("# header\nRome\tIT\t41.9\t12.5\t2800000\nParis\tFR\tnorth\t2.3\t2100000\n");
    try {
        load_city_table(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream short_row("Rome\tIT\t41.9\n");
    EXPECT_THROW(load_city_table(short_row), ParseError);
}

TEST(Queries, CityOuterKeywordInner) {
    std::vector<City> cities{{"Rome", "IT", 0, 0, 5000}, {"Oslo", "NO", 0, 0, 5000}};
    std::vector<std::string> kw{"church", "bridge"};
    std::vector<std::string> got;
    auto n = generate_keyword_queries(cities, kw, [&](const std::string& q) { got.push_back(q); });
    EXPECT_EQ(got, (std::vector<std::string>{"Rome church", "Rome bridge", "Oslo church", "Oslo bridge"}));
    EXPECT_EQ(n.raw, 4u);
    EXPECT_EQ(n.deduplicated, 4u);
}

TEST(Queries, DuplicatesCollapseButRawCountsAll) {
    std::vector<City> cities{{"Salem", "US", 0, 0, 5000}, {"Salem", "US", 1, 1, 9000}, {"Salem", "IN", 2, 2, 9000}};
    std::vector<std::string> kw{"church", "market"};
    std::vector<std::string> got;
    auto n = generate_keyword_queries(cities, kw, [&](const std::string& q) { got.push_back(q); });
    EXPECT_EQ(n.raw, 6u);
    EXPECT_EQ(n.deduplicated, 2u);
    EXPECT_EQ(got.size(), 2u);
    std::size_t raw_emitted = 0;
    generate_keyword_queries(cities, kw, [&](const std::string&) { ++raw_emitted; }, false);
    EXPECT_EQ(raw_emitted, 6u);
}

TEST(Queries, EmptyInputsAreErrors) {
    std::vector<City> cities{{"Rome", "IT", 0, 0, 5000}};
    std::vector<std::string> none;
    EXPECT_THROW(generate_keyword_queries(cities, none, [](const std::string&) {}), Error);
}

TEST(Queries, CountingMode) {
    std::vector<City> cities(144563);
    std::vector<std::string> kw(183, "k");
    EXPECT_EQ(count_keyword_queries(cities, kw), 26455029u);
}

TEST(BBox, LatitudeDeltaIsConstant) {
    const double expect = 10.0 / (std::numbers::pi * 6371.0) * 180.0;
    EXPECT_NEAR(lat_delta_deg(10.0), 0.089932, 1e-6);
    for (double lat : {-80.0, -33.3, 0.0, 45.0, 60.0, 84.9}) {
        auto boxes = bbox_around(lat, 10.0, 10.0);
        ASSERT_EQ(boxes.size(), 1u);
        EXPECT_NEAR((boxes[0].lat_max - boxes[0].lat_min) / 2, expect, 1e-12);
    }
}

TEST(BBox, LongitudeWidensWithLatitude) {
    auto eq = bbox_around(0, 0, 10)[0];
    auto north = bbox_around(60, 0, 10)[0];
    EXPECT_NEAR(north.lon_max / eq.lon_max, 2.0, 1e-9);  // 1 / cos 60
}

TEST(BBox, AntimeridianSplitsInTwo) {
    auto boxes = bbox_around(-17.0, 179.98, 10.0);
    ASSERT_EQ(boxes.size(), 2u);
    bool east = false, west = false;
    for (const auto& b : boxes) {
        EXPECT_GE(b.lon_min, -180.0);
        EXPECT_LE(b.lon_max, 180.0);
        east |= b.lon_max == 180.0;
        west |= b.lon_min == -180.0;
    }
    EXPECT_TRUE(east && west);
    EXPECT_TRUE(boxes[0].contains(-17.0, 179.98) || boxes[1].contains(-17.0, 179.98));
}

TEST(BBox, NearThePoleClampsLatitude) {
    auto boxes = bbox_around(89.99, 20.0, 10.0);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_LE(boxes[0].lat_max, 90.0);
    const double dlon = lat_delta_deg(10.0) / std::cos(85.0 * std::numbers::pi / 180.0);
    EXPECT_NEAR(boxes[0].lon_max - 20.0, dlon, 1e-9);
}

TEST(BBox, ContainsSeedForRandomCities) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
    for (int i = 0; i < 2000; ++i) {
        const double a = lat(rng), o = lon(rng);
        bool inside = false;
        for (const auto& b : bbox_around(a, o, 10.0)) inside |= b.contains(a, o);
        ASSERT_TRUE(inside) << a << "," << o;
    }
}
