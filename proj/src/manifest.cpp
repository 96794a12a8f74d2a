#include "geocurate/manifest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <sodium.h>

#include "geocurate/error.hpp"
#include "geocurate/io.hpp"

namespace geocurate {

namespace {

using nlohmann::json;

constexpr std::array kSources{"flickr", "mapillary", "unsplash"};
constexpr std::array kSplits{"train", "val", "test"};
constexpr std::array kStatuses{"raw", "kept", "rejected"};
constexpr std::array kReasons{"date", "grey", "non_urban", "blacklisted_scene", "face_area",
                              "unassignable_gps"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<const char*, N>& names, std::string_view s) {
    for (std::size_t i = 0; i < N; ++i)
        if (s == names[i]) return static_cast<E>(i);
    return std::nullopt;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

// Known keys; anything else lands in ImageRecord::extra.
constexpr std::array kKnownKeys{"id",     "source",       "lat",         "lon",
                                "captured_at", "width",   "height",      "is_color",
                                "country_code", "class_id", "split",     "status",
                                "rejection_reason", "path"};

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line_no);
    if (!it->is_string()) throw ParseError(std::string("field '") + key + "' must be a string", line_no);
    return it->get<std::string>();
}

double require_number(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line_no);
    if (!it->is_number()) throw ParseError(std::string("field '") + key + "' must be a number", line_no);
    return it->get<double>();
}

int require_int(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line_no);
    if (!it->is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer", line_no);
    auto v = it->get<std::int64_t>();
    if (v < INT32_MIN || v > INT32_MAX) throw ParseError(std::string("field '") + key + "' out of range", line_no);
    return static_cast<int>(v);
}

template <typename E>
E require_enum(const json& obj, const char* key, std::size_t line_no,
               std::optional<E> (*parse)(std::string_view)) {
    auto text = require_string(obj, key, line_no);
    auto v = parse(text);
    if (!v) throw ParseError(std::string("unknown ") + key + " '" + text + "'", line_no);
    return *v;
}

}  // namespace

std::string_view to_string(Source s) { return kSources[static_cast<std::size_t>(s)]; }
std::string_view to_string(Split s) { return kSplits[static_cast<std::size_t>(s)]; }
std::string_view to_string(Status s) { return kStatuses[static_cast<std::size_t>(s)]; }
std::string_view to_string(RejectionReason r) { return kReasons[static_cast<std::size_t>(r)]; }

std::optional<Source> parse_source(std::string_view s) { return lookup<Source>(kSources, s); }
std::optional<Split> parse_split(std::string_view s) { return lookup<Split>(kSplits, s); }
std::optional<Status> parse_status(std::string_view s) { return lookup<Status>(kStatuses, s); }
std::optional<RejectionReason> parse_rejection_reason(std::string_view s) {
    return lookup<RejectionReason>(kReasons, s);
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::optional<Date> parse_iso_date(std::string_view text) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
    auto y = parse_int<int>(text.substr(0, 4));
    auto m = parse_int<int>(text.substr(5, 2));
    auto d = parse_int<int>(text.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    if (*m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
    return Date{*y, *m, *d};
}

std::string record_id(Source source, std::string_view native_id) {
    static const bool ready = sodium_init() >= 0;
    if (!ready) throw Error("libsodium initialisation failed");
    std::string message(to_string(source));
    message.push_back('\0');
    message.append(native_id);
    std::array<unsigned char, 16> digest{};
    crypto_generichash(digest.data(), digest.size(),
                       reinterpret_cast<const unsigned char*>(message.data()), message.size(), nullptr, 0);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (auto b : digest) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xF]);
    }
    return out;
}

bool is_country_code(std::string_view code) {
    return code.size() == 2 && code[0] >= 'A' && code[0] <= 'Z' && code[1] >= 'A' && code[1] <= 'Z';
}

void validate_record(const ImageRecord& r) {
    if (r.id.empty()) throw ValidationError("id", "empty");
    if (!(r.lat >= -90.0 && r.lat <= 90.0)) throw ValidationError("lat", "lat out of range");
    if (!(r.lon >= -180.0 && r.lon < 180.0)) throw ValidationError("lon", "lon out of range");
    if (r.width < 1) throw ValidationError("width", "must be >= 1");
    if (r.height < 1) throw ValidationError("height", "must be >= 1");
    if (r.country_code && !is_country_code(*r.country_code))
        throw ValidationError("country_code", "not an ISO 3166-1 alpha-2 code: '" + *r.country_code + "'");
    if (r.class_id && *r.class_id < 0) throw ValidationError("class_id", "must be >= 0");
    if (r.class_id && !r.country_code) throw ValidationError("class_id", "present without country_code");
    if (r.status == Status::rejected && !r.rejection_reason)
        throw ValidationError("rejection_reason", "required when status is rejected");
    if (r.status != Status::rejected && r.rejection_reason)
        throw ValidationError("rejection_reason", "only allowed when status is rejected");
}

ImageRecord parse_record(std::string_view line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("record must be a JSON object", line_no);

    ImageRecord r;
    r.id = require_string(obj, "id", line_no);
    r.source = require_enum<Source>(obj, "source", line_no, parse_source);
    r.lat = require_number(obj, "lat", line_no);
    r.lon = require_number(obj, "lon", line_no);
    r.width = require_int(obj, "width", line_no);
    r.height = require_int(obj, "height", line_no);
    r.path = require_string(obj, "path", line_no);

    if (obj.contains("captured_at") && !obj["captured_at"].is_null()) {
        auto text = require_string(obj, "captured_at", line_no);
        r.captured_at = parse_iso_date(text);
        if (!r.captured_at) throw ParseError("captured_at is not an ISO 8601 date: '" + text + "'", line_no);
    }
    if (obj.contains("is_color") && !obj["is_color"].is_null()) {
        if (!obj["is_color"].is_boolean()) throw ParseError("field 'is_color' must be a boolean", line_no);
        r.is_color = obj["is_color"].get<bool>();
    }
    if (obj.contains("country_code") && !obj["country_code"].is_null())
        r.country_code = require_string(obj, "country_code", line_no);
    if (obj.contains("class_id") && !obj["class_id"].is_null()) r.class_id = require_int(obj, "class_id", line_no);
    if (obj.contains("split") && !obj["split"].is_null())
        r.split = require_enum<Split>(obj, "split", line_no, parse_split);
    if (obj.contains("status") && !obj["status"].is_null())
        r.status = require_enum<Status>(obj, "status", line_no, parse_status);
    if (obj.contains("rejection_reason") && !obj["rejection_reason"].is_null())
        r.rejection_reason = require_enum<RejectionReason>(obj, "rejection_reason", line_no, parse_rejection_reason);

    for (auto& [key, value] : obj.items()) {
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) r.extra[key] = value;
    }

    try {
        validate_record(r);
    } catch (const ValidationError& e) {
        if (line_no) throw ValidationError(e.field(), std::string(e.what()) + " (line " + std::to_string(line_no) + ")");
        throw;
    }
    return r;
}

std::string serialize_record(const ImageRecord& r) {
    json obj = r.extra.is_object() ? r.extra : json::object();
    obj["id"] = r.id;
    obj["source"] = to_string(r.source);
    obj["lat"] = r.lat;
    obj["lon"] = r.lon;
    obj["width"] = r.width;
    obj["height"] = r.height;
    obj["status"] = to_string(r.status);
    obj["path"] = r.path;
    if (r.captured_at) obj["captured_at"] = r.captured_at->iso();
    if (r.is_color) obj["is_color"] = *r.is_color;
    if (r.country_code) obj["country_code"] = *r.country_code;
    if (r.class_id) obj["class_id"] = *r.class_id;
    if (r.split) obj["split"] = to_string(*r.split);
    if (r.rejection_reason) obj["rejection_reason"] = to_string(*r.rejection_reason);
    return obj.dump();
}

void ManifestStats::add(const ImageRecord& r) {
    ++total;
    ++per_source[std::string(to_string(r.source))];
    ++per_status[std::string(to_string(r.status))];
    if (r.country_code) ++per_country[*r.country_code];
    if (r.class_id) ++per_class[*r.class_id];
    if (r.split) ++per_split[std::string(to_string(*r.split))];
}

ManifestStats& ManifestStats::merge(const ManifestStats& o) {
    total += o.total;
    for (auto& [k, v] : o.per_source) per_source[k] += v;
    for (auto& [k, v] : o.per_country) per_country[k] += v;
    for (auto& [k, v] : o.per_class) per_class[k] += v;
    for (auto& [k, v] : o.per_split) per_split[k] += v;
    for (auto& [k, v] : o.per_status) per_status[k] += v;
    return *this;
}

nlohmann::json ManifestStats::to_json() const {
    json classes = json::object();
    for (auto& [k, v] : per_class) classes[std::to_string(k)] = v;
    return json{{"total", total},         {"per_source", per_source}, {"per_status", per_status},
                {"per_country", per_country}, {"per_class", classes},  {"per_split", per_split}};
}

ManifestStats tally(std::span<const ImageRecord> records) {
    ManifestStats stats;
    for (const auto& r : records) stats.add(r);
    return stats;
}

ManifestStats validate_manifest(std::span<const ImageRecord> records) {
    std::unordered_map<std::string_view, std::size_t> seen;
    seen.reserve(records.size());
    std::vector<std::string> dups;
    for (const auto& r : records) {
        if (++seen[r.id] == 2) dups.push_back(r.id);
    }
    if (!dups.empty()) {
        std::sort(dups.begin(), dups.end());
        throw DuplicateIdError(std::move(dups));
    }
    return tally(records);
}

void Manifest::set_header(std::string_view key, std::string_view value) {
    std::string prefix = std::string(key) + ":";
    std::string line = prefix + " " + std::string(value);
    for (auto& h : header) {
        if (h.starts_with(prefix)) {
            h = line;
            return;
        }
    }
    header.push_back(line);
}

std::optional<std::string> Manifest::header_value(std::string_view key) const {
    std::string prefix = std::string(key) + ":";
    for (const auto& h : header)
        if (h.starts_with(prefix)) return std::string(trim(std::string_view(h).substr(prefix.size())));
    return std::nullopt;
}

Manifest read_manifest(std::istream& in) {
    Manifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            m.header.emplace_back(trim(body.substr(1)));
            continue;
        }
        m.records.push_back(parse_record(body, line_no));
    }
    return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_manifest(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_manifest(std::ostream& out, const Manifest& m) {
    std::vector<const ImageRecord*> order;
    order.reserve(m.records.size());
    for (const auto& r : m.records) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto& h : m.header) out << "# " << h << '\n';
    for (auto* r : order) out << serialize_record(*r) << '\n';
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    write_file_atomic(path, [&](std::ostream& out) { write_manifest(out, m); });
}

}  // namespace geocurate
