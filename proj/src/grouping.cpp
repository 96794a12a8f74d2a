#include "geocurate/grouping.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include "geocurate/io.hpp"
#include "geocurate/manifest.hpp"
#include "geocurate/parallel.hpp"

namespace geocurate {

namespace {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

Vec3 unit_vector(LatLon p) {
    const double lat = p.lat * std::numbers::pi / 180.0, lon = p.lon * std::numbers::pi / 180.0;
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

LatLon to_latlon(const Vec3& v) {
    const double r = std::hypot(v.x, v.y);
    return {std::atan2(v.z, r) * 180.0 / std::numbers::pi, std::atan2(v.y, v.x) * 180.0 / std::numbers::pi};
}

struct Group {
    std::vector<std::string> codes;  // sorted
    std::uint64_t count = 0;
    Vec3 weighted;  // sum of count * unit vector
    Vec3 plain;     // sum of unit vectors, used while count is zero
    LatLon centroid;

    const std::string& key() const { return codes.front(); }
    void refresh() {
        const Vec3& v = count > 0 ? weighted : plain;
        centroid = (v.x == 0 && v.y == 0 && v.z == 0) ? LatLon{} : to_latlon(v);
    }
};

}  // namespace

std::vector<std::vector<std::string>> ClassGrouping::members() const {
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(std::max(0, num_classes)));
    for (const auto& [code, id] : assignment)
        if (id >= 0 && id < num_classes) out[static_cast<std::size_t>(id)].push_back(code);
    return out;
}

void validate_grouping(const ClassGrouping& g, std::span<const std::string> required) {
    if (g.num_classes < 1) throw ValidationError("grouping", "no classes");
    if (g.labels.size() != static_cast<std::size_t>(g.num_classes))
        throw ValidationError("grouping", "label count differs from class count");
    std::vector<std::size_t> sizes(static_cast<std::size_t>(g.num_classes), 0);
    for (const auto& [code, id] : g.assignment) {
        if (!is_country_code(code)) throw ValidationError("grouping", "bad country code '" + code + "'");
        if (id < 0 || id >= g.num_classes)
            throw ValidationError("grouping", "class id " + std::to_string(id) + " out of range for " + code);
        ++sizes[static_cast<std::size_t>(id)];
    }
    for (std::size_t i = 0; i < sizes.size(); ++i)
        if (sizes[i] == 0) throw ValidationError("grouping", "class " + std::to_string(i) + " is empty");
    for (const auto& code : required)
        if (!g.assignment.contains(code)) throw ValidationError("grouping", "country " + code + " is not assigned");
}

ClassGrouping load_grouping(std::istream& in, std::span<const std::string> required) {
    ClassGrouping g;
    std::map<int, std::string> labels;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto body = trim(line);
        if (body.empty()) continue;
        if (body.front() == '#') {
            auto h = trim(body.substr(1));
            if (h.starts_with("version:")) g.version = std::string(trim(h.substr(8)));
            continue;
        }
        auto sp1 = body.find_first_of(" \t");
        if (sp1 == std::string_view::npos) throw ParseError("missing class id", row);
        const std::string code(body.substr(0, sp1));
        auto rest = trim(body.substr(sp1));
        auto sp2 = rest.find_first_of(" \t");
        auto id_text = rest.substr(0, sp2);
        int id = -1;
        auto [p, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (id_text.empty() || ec != std::errc{} || p != id_text.data() + id_text.size() || id < 0)
            throw ParseError("bad class id for " + code, row);
        const std::string label(sp2 == std::string_view::npos ? std::string_view{} : trim(rest.substr(sp2)));
        if (!is_country_code(code)) throw ParseError("bad country code '" + code + "'", row);
        if (!g.assignment.emplace(code, id).second)
            throw ValidationError("grouping", "duplicate assignment for " + code + " (line " + std::to_string(row) + ")");
        auto [it, inserted] = labels.emplace(id, label);
        if (!inserted && !label.empty() && it->second.empty()) it->second = label;
        if (!inserted && !label.empty() && !it->second.empty() && it->second != label)
            throw ValidationError("grouping", "class " + std::to_string(id) + " has conflicting labels");
    }
    g.num_classes = labels.empty() ? 0 : labels.rbegin()->first + 1;
    g.labels.assign(static_cast<std::size_t>(g.num_classes), {});
    for (auto& [id, label] : labels) g.labels[static_cast<std::size_t>(id)] = label.empty() ? "class" + std::to_string(id) : label;
    validate_grouping(g, required);
    return g;
}

ClassGrouping load_grouping(const std::filesystem::path& path, std::span<const std::string> required) {
    auto in = open_input(path);
    try {
        return load_grouping(in, required);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_grouping(std::ostream& out, const ClassGrouping& g) {
    out << "# version: " << (g.version.empty() ? "1" : g.version) << '\n';
    out << "# country_code class_id class_label\n";
    const auto members = g.members();
    for (std::size_t id = 0; id < members.size(); ++id)
        for (const auto& code : members[id]) out << code << ' ' << id << ' ' << g.labels[id] << '\n';
}

int map_country_to_class(std::string_view code, const ClassGrouping& g) {
    auto it = g.assignment.find(std::string(code));
    if (it == g.assignment.end()) throw UnknownCountryError(std::string(code));
    return it->second;
}

ClassGrouping compute_grouping(std::span<const CountryStat> stats, int num_classes, std::uint64_t min_images,
                               unsigned workers, GroupingTrace* trace) {
    if (num_classes < 1) throw ValidationError("K", "must be >= 1");
    if (static_cast<std::size_t>(num_classes) > stats.size())
        throw ValidationError("K", "K = " + std::to_string(num_classes) + " exceeds the " +
                                       std::to_string(stats.size()) + " countries provided");

    std::vector<Group> groups;
    groups.reserve(stats.size());
    std::set<std::string> seen;
    for (const auto& s : stats) {
        if (!is_country_code(s.code)) throw ValidationError("stats", "bad country code '" + s.code + "'");
        if (!seen.insert(s.code).second) throw ValidationError("stats", "duplicate country " + s.code);
        Group g;
        g.codes = {s.code};
        g.count = s.count;
        const Vec3 u = unit_vector(s.centroid);
        g.plain = u;
        g.weighted = {u.x * double(s.count), u.y * double(s.count), u.z * double(s.count)};
        g.refresh();
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.key() < b.key(); });

    auto min_count = [&] {
        std::uint64_t m = std::numeric_limits<std::uint64_t>::max();
        for (const auto& g : groups) m = std::min(m, g.count);
        return m;
    };

    std::vector<double> dist;
    while (groups.size() > static_cast<std::size_t>(num_classes)) {
        // Groups stay sorted by key, so the first minimum is the smallest code.
        std::size_t src = 0;
        for (std::size_t i = 1; i < groups.size(); ++i)
            if (groups[i].count < groups[src].count) src = i;

        dist.assign(groups.size(), 0.0);
        parallel_for(groups.size(), workers, [&](std::size_t i) {
            dist[i] = i == src ? std::numeric_limits<double>::infinity()
                               : haversine_km(groups[src].centroid, groups[i].centroid);
        });
        std::size_t dst = src == 0 ? 1 : 0;
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (i != src && dist[i] < dist[dst]) dst = i;

        MergeStep step{groups[src].key(), groups[dst].key(), dist[dst], min_count(), 0};
        Group& into = groups[dst];
        Group& from = groups[src];
        into.codes.insert(into.codes.end(), from.codes.begin(), from.codes.end());
        std::sort(into.codes.begin(), into.codes.end());
        into.count += from.count;
        into.weighted = {into.weighted.x + from.weighted.x, into.weighted.y + from.weighted.y,
                         into.weighted.z + from.weighted.z};
        into.plain = {into.plain.x + from.plain.x, into.plain.y + from.plain.y, into.plain.z + from.plain.z};
        into.refresh();
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(src));
        std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.key() < b.key(); });
        step.min_count_after = min_count();
        if (trace) trace->steps.push_back(std::move(step));
    }

    ClassGrouping out;
    out.num_classes = num_classes;
    out.version = "greedy-K" + std::to_string(num_classes);
    for (std::size_t id = 0; id < groups.size(); ++id) {
        std::string label;
        for (const auto& code : groups[id].codes) {
            if (!label.empty()) label += '+';
            label += code;
            out.assignment[code] = static_cast<int>(id);
        }
        out.labels.push_back(std::move(label));
        if (trace && groups[id].count < min_images) trace->classes_below_min.push_back(static_cast<int>(id));
    }
    return out;
}

}  // namespace geocurate
