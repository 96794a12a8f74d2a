#include "geocurate/querygen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <unordered_set>

#include "geocurate/error.hpp"
#include "geocurate/geo.hpp"
#include "geocurate/io.hpp"
#include "geocurate/manifest.hpp"

namespace geocurate {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (;;) {
        auto tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return cols;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

}  // namespace

std::vector<City> load_city_table(std::istream& in, std::int64_t min_population) {
    std::vector<City> cities;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line.front() == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 5) throw ParseError("expected 5 tab-separated columns, got " + std::to_string(cols.size()), row);
        City c;
        c.name = std::string(trim(cols[0]));
        c.country_code = std::string(trim(cols[1]));
        if (c.name.empty()) throw ParseError("empty city name", row);
        if (!is_country_code(c.country_code)) throw ParseError("bad country code '" + c.country_code + "'", row);
        if (!parse_number(cols[2], c.lat) || c.lat < -90.0 || c.lat > 90.0) throw ParseError("bad latitude", row);
        if (!parse_number(cols[3], c.lon) || c.lon < -180.0 || c.lon > 180.0) throw ParseError("bad longitude", row);
        if (c.lon == 180.0) c.lon = -180.0;
        if (!parse_number(cols[4], c.population) || c.population < 0) throw ParseError("bad population", row);
        if (c.population >= min_population) cities.push_back(std::move(c));
    }
    return cities;
}

std::vector<City> load_city_table(const std::filesystem::path& path, std::int64_t min_population) {
    auto in = open_input(path);
    try {
        return load_city_table(in, min_population);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> load_keywords(std::istream& in) {
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto kw = trim(line);
        if (kw.empty() || kw.front() == '#') continue;
        out.emplace_back(kw);
    }
    return out;
}

std::vector<std::string> load_keywords(const std::filesystem::path& path) {
    auto in = open_input(path);
    return load_keywords(in);
}

std::string make_query(const City& city, std::string_view keyword) {
    std::string q;
    q.reserve(city.name.size() + 1 + keyword.size());
    q.append(city.name).push_back(' ');
    q.append(keyword);
    return q;
}

QueryCounts generate_keyword_queries(std::span<const City> cities, std::span<const std::string> keywords,
                                     const std::function<void(const std::string&)>& sink, bool dedup) {
    if (keywords.empty()) throw Error("keyword list is empty");
    if (cities.empty()) throw Error("city list is empty");
    QueryCounts counts;
    std::unordered_set<std::string> seen;
    for (const auto& city : cities) {
        for (const auto& kw : keywords) {
            auto q = make_query(city, kw);
            ++counts.raw;
            if (dedup) {
                if (!seen.insert(q).second) continue;
            }
            ++counts.deduplicated;
            sink(q);
        }
    }
    return counts;
}

std::uint64_t count_keyword_queries(std::span<const City> cities, std::span<const std::string> keywords) {
    if (keywords.empty()) throw Error("keyword list is empty");
    if (cities.empty()) throw Error("city list is empty");
    return static_cast<std::uint64_t>(cities.size()) * keywords.size();
}

double lat_delta_deg(double half_width_km) {
    return half_width_km * 180.0 / (std::numbers::pi * kEarthRadiusKm);
}

std::vector<GeoBBox> bbox_around(double lat, double lon, double half_width_km) {
    const double dlat = lat_delta_deg(half_width_km);
    const double clamped = std::clamp(lat, -85.0, 85.0);
    const double dlon = dlat / std::cos(clamped * std::numbers::pi / 180.0);

    const double lat_min = std::max(-90.0, lat - dlat);
    const double lat_max = std::min(90.0, lat + dlat);
    if (dlon >= 180.0) return {GeoBBox{lat_min, lat_max, -180.0, 180.0}};

    const double lo = lon - dlon;
    const double hi = lon + dlon;
    if (lo < -180.0) return {GeoBBox{lat_min, lat_max, lo + 360.0, 180.0}, GeoBBox{lat_min, lat_max, -180.0, hi}};
    if (hi > 180.0) return {GeoBBox{lat_min, lat_max, lo, 180.0}, GeoBBox{lat_min, lat_max, -180.0, hi - 360.0}};
    return {GeoBBox{lat_min, lat_max, lo, hi}};
}

}  // namespace geocurate
