#include "geocurate/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/box.hpp>
#include <boost/geometry/geometries/point.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "geocurate/error.hpp"
#include "geocurate/io.hpp"
#include "geocurate/manifest.hpp"

namespace geocurate {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using BPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using BBox = bg::model::box<BPoint>;
using RTreeValue = std::pair<BBox, std::size_t>;

struct CountryPolygonSet::Index {
    std::vector<Candidate> entries;
    bgi::rtree<RTreeValue, bgi::quadratic<16>> tree;
};

namespace {

constexpr double kCloseTolerance = 1e-9;

double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct RingMoments {
    double area = 0.0;  // signed by role: outer +, hole -
    double cx = 0.0;    // area-weighted
    double cy = 0.0;
};

RingMoments ring_moments(const Ring& ring, bool hole) {
    double a2 = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const double x0 = ring[i].lon, y0 = ring[i].lat;
        const double x1 = ring[i + 1].lon, y1 = ring[i + 1].lat;
        const double cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if (a2 == 0.0) return {};
    // cx/(3*a2) is the centroid whatever the winding; scale by |area| with role sign.
    const double area = std::abs(a2) / 2.0 * (hole ? -1.0 : 1.0);
    return {area, cx / (3.0 * a2) * area, cy / (3.0 * a2) * area};
}

double normalize_lon(double lon) {
    lon = std::fmod(lon + 180.0, 360.0);
    if (lon < 0) lon += 360.0;
    return lon - 180.0;
}

Ring close_ring(Ring ring, const std::string& code) {
    if (ring.size() < 3) throw ValidationError(code, "ring has fewer than 3 vertices");
    const auto& f = ring.front();
    const auto& b = ring.back();
    if (!(f == b)) {
        if (std::abs(f.lat - b.lat) <= kCloseTolerance && std::abs(f.lon - b.lon) <= kCloseTolerance) {
            ring.back() = f;
        } else {
            throw ValidationError(code, "unclosed ring");
        }
    }
    if (ring.size() < 4) throw ValidationError(code, "ring has fewer than 3 distinct vertices");
    return ring;
}

// Makes consecutive longitude steps shorter than 180 degrees. A ring that still does not
// close afterwards encircles a pole and is closed along that pole's latitude.
Ring unwrap_ring(const Ring& ring) {
    Ring out = ring;
    for (std::size_t i = 1; i < out.size(); ++i) {
        while (out[i].lon - out[i - 1].lon > 180.0) out[i].lon -= 360.0;
        while (out[i].lon - out[i - 1].lon < -180.0) out[i].lon += 360.0;
    }
    if (std::abs(out.back().lon - out.front().lon) > kCloseTolerance) {
        double mean_lat = 0.0;
        for (const auto& v : out) mean_lat += v.lat;
        const double pole = mean_lat >= 0 ? 90.0 : -90.0;
        const auto last = out.back();
        const auto first = out.front();
        out.push_back({pole, last.lon});
        out.push_back({pole, first.lon});
        out.push_back(first);
    } else {
        out.back() = out.front();
    }
    return out;
}

// Sutherland-Hodgman against the half-plane keep(lon).
template <typename Inside>
Ring clip_half_plane(const Ring& ring, double boundary, Inside inside) {
    Ring out;
    if (ring.size() < 2) return out;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const LatLon a = ring[i], b = ring[i + 1];
        const bool ina = inside(a.lon), inb = inside(b.lon);
        if (ina) out.push_back(a);
        if (ina != inb) {
            const double t = (boundary - a.lon) / (b.lon - a.lon);
            out.push_back({a.lat + t * (b.lat - a.lat), boundary});
        }
    }
    if (!out.empty()) out.push_back(out.front());
    return out;
}

Ring clip_to_window(const Ring& ring, double lo, double hi) {
    auto r = clip_half_plane(ring, lo, [lo](double x) { return x >= lo; });
    r = clip_half_plane(r, hi, [hi](double x) { return x <= hi; });
    if (r.size() < 4) return {};
    if (ring_moments(r, false).area == 0.0) return {};
    return r;
}

LatLonBox ring_bbox(const Ring& ring) {
    LatLonBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& v : ring) {
        b.lat_min = std::min(b.lat_min, v.lat);
        b.lat_max = std::max(b.lat_max, v.lat);
        b.lon_min = std::min(b.lon_min, v.lon);
        b.lon_max = std::max(b.lon_max, v.lon);
    }
    return b;
}

bool on_segment(double x, double y, const LatLon& a, const LatLon& b) {
    const double dx = b.lon - a.lon, dy = b.lat - a.lat;
    const double px = x - a.lon, py = y - a.lat;
    const double cross = dx * py - dy * px;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return px == 0.0 && py == 0.0;
    if (std::abs(cross) > 1e-12 * std::sqrt(len2)) return false;
    const double dot = px * dx + py * dy;
    return dot >= 0.0 && dot <= len2;
}

}  // namespace

double haversine_km(LatLon a, LatLon b) {
    const double dlat = to_rad(b.lat - a.lat);
    const double dlon = to_rad(b.lon - a.lon);
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(to_rad(a.lat)) * std::cos(to_rad(b.lat)) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

LatLon rings_centroid(const std::vector<Ring>& rings) {
    double area = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < rings.size(); ++i) {
        auto m = ring_moments(rings[i], i > 0);
        area += m.area;
        cx += m.cx;
        cy += m.cy;
    }
    if (area == 0.0) return {};
    return {cy / area, cx / area};
}

bool point_in_polygon(double lat, double lon, const Polygon& polygon) {
    bool inside = false;
    for (const auto& ring : polygon.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const LatLon& a = ring[i];
            const LatLon& b = ring[i + 1];
            if (on_segment(lon, lat, a, b)) return true;
            if ((a.lat > lat) != (b.lat > lat)) {
                const double x = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
                if (lon < x) inside = !inside;
            }
        }
    }
    return inside;
}

CountryPolygonSet::CountryPolygonSet() : index_(std::make_unique<Index>()) {}
CountryPolygonSet::~CountryPolygonSet() = default;
CountryPolygonSet::CountryPolygonSet(CountryPolygonSet&&) noexcept = default;
CountryPolygonSet& CountryPolygonSet::operator=(CountryPolygonSet&&) noexcept = default;

CountryPolygonSet CountryPolygonSet::build(std::vector<CountryFeature> features) {
    std::sort(features.begin(), features.end(), [](const auto& a, const auto& b) { return a.code < b.code; });
    for (std::size_t i = 1; i < features.size(); ++i)
        if (features[i].code == features[i - 1].code)
            throw ValidationError(features[i].code, "duplicate country code");

    CountryPolygonSet set;
    for (auto& feature : features) {
        if (!is_country_code(feature.code)) throw ValidationError(feature.code, "not an ISO 3166-1 alpha-2 code");
        Country country;
        country.code = feature.code;
        double area = 0.0, cx = 0.0, cy = 0.0;

        for (auto& rings : feature.polygons) {
            if (rings.empty()) continue;
            std::vector<Ring> unwrapped;
            for (auto& ring : rings) unwrapped.push_back(unwrap_ring(close_ring(std::move(ring), feature.code)));
            const auto outer_box = ring_bbox(unwrapped[0]);
            for (std::size_t h = 1; h < unwrapped.size(); ++h) {
                const double shift = unwrapped[h][0].lon < outer_box.lon_min   ? 360.0
                                     : unwrapped[h][0].lon > outer_box.lon_max ? -360.0
                                                                               : 0.0;
                for (auto& v : unwrapped[h]) v.lon += shift;
            }
            for (std::size_t h = 0; h < unwrapped.size(); ++h) {
                auto m = ring_moments(unwrapped[h], h > 0);
                area += m.area;
                cx += m.cx;
                cy += m.cy;
            }

            if (outer_box.lon_min >= -180.0 && outer_box.lon_max <= 180.0) {
                Polygon p{std::move(unwrapped), outer_box};
                country.polygons.push_back(std::move(p));
                continue;
            }
            // Crosses the antimeridian: cut into 360-degree windows and shift each back.
            const int k_min = static_cast<int>(std::floor((outer_box.lon_min + 180.0) / 360.0));
            const int k_max = static_cast<int>(std::floor((outer_box.lon_max + 180.0) / 360.0));
            for (int k = k_min; k <= k_max; ++k) {
                const double lo = -180.0 + 360.0 * k, hi = 180.0 + 360.0 * k;
                Polygon piece;
                for (std::size_t h = 0; h < unwrapped.size(); ++h) {
                    auto clipped = clip_to_window(unwrapped[h], lo, hi);
                    if (clipped.empty()) {
                        if (h == 0) break;
                        continue;
                    }
                    for (auto& v : clipped) v.lon -= 360.0 * k;
                    piece.rings.push_back(std::move(clipped));
                }
                if (piece.rings.empty()) continue;
                piece.bbox = ring_bbox(piece.rings[0]);
                country.polygons.push_back(std::move(piece));
            }
        }
        if (country.polygons.empty()) throw ValidationError(feature.code, "no polygons");
        if (area != 0.0) country.centroid = {cy / area, normalize_lon(cx / area)};
        set.countries_.push_back(std::move(country));
    }

    std::vector<RTreeValue> values;
    for (std::size_t c = 0; c < set.countries_.size(); ++c) {
        const auto& polys = set.countries_[c].polygons;
        for (std::size_t p = 0; p < polys.size(); ++p) {
            const auto& b = polys[p].bbox;
            values.emplace_back(BBox(BPoint(b.lon_min, b.lat_min), BPoint(b.lon_max, b.lat_max)),
                                set.index_->entries.size());
            set.index_->entries.push_back({c, p});
        }
    }
    set.index_->tree = bgi::rtree<RTreeValue, bgi::quadratic<16>>(values.begin(), values.end());
    return set;
}

CountryPolygonSet CountryPolygonSet::from_geojson(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
        throw ParseError("boundary file must be a GeoJSON FeatureCollection");

    auto read_ring = [](const nlohmann::json& coords, const std::string& code) {
        Ring ring;
        if (!coords.is_array()) throw ParseError("feature " + code + ": ring must be an array");
        for (const auto& pt : coords) {
            if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number())
                throw ParseError("feature " + code + ": bad coordinate");
            ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
        }
        return ring;
    };

    std::vector<CountryFeature> features;
    std::size_t index = 0;
    for (const auto& f : doc["features"]) {
        ++index;
        const auto& props = f.value("properties", nlohmann::json::object());
        std::string code;
        for (const char* key : {"code", "iso_a2", "ISO_A2"})
            if (props.contains(key) && props[key].is_string()) {
                code = props[key].get<std::string>();
                break;
            }
        if (code.empty()) throw ParseError("feature #" + std::to_string(index) + " has no country code");
        const auto& geom = f.value("geometry", nlohmann::json::object());
        const auto type = geom.value("type", "");
        if (!geom.contains("coordinates")) throw ParseError("feature " + code + ": missing coordinates");
        CountryFeature cf{code, {}};
        auto read_polygon = [&](const nlohmann::json& poly) {
            std::vector<Ring> rings;
            for (const auto& r : poly) rings.push_back(read_ring(r, code));
            cf.polygons.push_back(std::move(rings));
        };
        if (type == "Polygon") {
            read_polygon(geom["coordinates"]);
        } else if (type == "MultiPolygon") {
            for (const auto& poly : geom["coordinates"]) read_polygon(poly);
        } else {
            throw ParseError("feature " + code + ": unsupported geometry type '" + type + "'");
        }
        features.push_back(std::move(cf));
    }
    return build(std::move(features));
}

CountryPolygonSet load_boundaries(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return CountryPolygonSet::from_geojson(doc);
}

const Country* CountryPolygonSet::find(std::string_view code) const {
    auto it = std::lower_bound(countries_.begin(), countries_.end(), code,
                               [](const Country& c, std::string_view k) { return c.code < k; });
    return it != countries_.end() && it->code == code ? &*it : nullptr;
}

std::vector<std::string> CountryPolygonSet::codes() const {
    std::vector<std::string> out;
    for (const auto& c : countries_) out.push_back(c.code);
    return out;
}

std::vector<CountryPolygonSet::Candidate> CountryPolygonSet::candidates(double lat, double lon) const {
    std::vector<RTreeValue> hits;
    index_->tree.query(bgi::intersects(BPoint(lon, lat)), std::back_inserter(hits));
    std::vector<Candidate> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(index_->entries[h.second]);
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return a.country != b.country ? a.country < b.country : a.polygon < b.polygon;
    });
    return out;
}

std::optional<std::string> assign_country(double lat, double lon, const CountryPolygonSet& set,
                                          double fallback_km) {
    for (const auto& c : set.candidates(lat, lon)) {
        const auto& country = set.countries()[c.country];
        if (point_in_polygon(lat, lon, country.polygons[c.polygon])) return country.code;
    }
    const Country* best = nullptr;
    double best_km = std::numeric_limits<double>::infinity();
    for (const auto& country : set.countries()) {
        const double d = haversine_km({lat, lon}, country.centroid);
        if (d < best_km) {
            best_km = d;
            best = &country;
        }
    }
    if (best && best_km <= fallback_km) return best->code;
    return std::nullopt;
}

}  // namespace geocurate
