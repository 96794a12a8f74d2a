#include "geocurate/filters.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>

#include "geocurate/io.hpp"
#include "geocurate/parallel.hpp"

namespace geocurate {

namespace {

std::optional<SuperCategory> parse_super(std::string_view s) {
    if (s == "indoor") return SuperCategory::indoor;
    if (s == "natural") return SuperCategory::natural;
    if (s == "urban") return SuperCategory::urban;
    return std::nullopt;
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

constexpr std::array kAllReasons{RejectionReason::date,      RejectionReason::grey,
                                 RejectionReason::non_urban, RejectionReason::blacklisted_scene,
                                 RejectionReason::face_area, RejectionReason::unassignable_gps};

}  // namespace

SceneTaxonomy::SceneTaxonomy(std::vector<SceneCategory> categories) : categories_(std::move(categories)) {
    for (std::size_t i = 0; i < categories_.size(); ++i) {
        if (!by_id_.emplace(categories_[i].id, i).second)
            throw ValidationError("taxonomy", "duplicate category id " + std::to_string(categories_[i].id));
    }
}

SceneTaxonomy SceneTaxonomy::load(std::istream& in) {
    std::vector<SceneCategory> cats;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::vector<std::string_view> cols;
        std::size_t start = 0;
        for (;;) {
            auto tab = body.find('\t', start);
            cols.push_back(trim(body.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start)));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (cols.size() != 3) throw ParseError("taxonomy row needs 3 tab-separated columns", row);
        auto id = parse_int(cols[0]);
        auto sup = parse_super(cols[2]);
        if (!id) throw ParseError("bad category id", row);
        if (!sup) throw ParseError("super-category must be indoor, natural or urban", row);
        cats.push_back({*id, std::string(cols[1]), *sup});
    }
    return SceneTaxonomy(std::move(cats));
}

SceneTaxonomy SceneTaxonomy::load(const std::filesystem::path& path) {
    auto in = open_input(path);
    return load(in);
}

void SceneTaxonomy::load_blacklist(std::istream& in) {
    std::set<int> ids;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        if (auto id = parse_int(body)) {
            ids.insert(*id);
        } else if (auto named = find_by_name(body)) {
            ids.insert(*named);
        } else {
            throw ParseError("blacklist entry '" + std::string(body) + "' is not in the taxonomy", row);
        }
    }
    set_blacklist(std::move(ids));
}

void SceneTaxonomy::load_blacklist(const std::filesystem::path& path) {
    auto in = open_input(path);
    load_blacklist(in);
}

void SceneTaxonomy::set_blacklist(std::set<int> ids) {
    for (int id : ids)
        if (!find(id)) throw ValidationError("blacklist", "unknown category id " + std::to_string(id));
    blacklist_ = std::move(ids);
}

const SceneCategory* SceneTaxonomy::find(int id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &categories_[it->second];
}

std::optional<int> SceneTaxonomy::find_by_name(std::string_view name) const {
    for (const auto& c : categories_)
        if (c.name == name) return c.id;
    return std::nullopt;
}

const SceneCategory& SceneTaxonomy::at(int id) const {
    if (auto* c = find(id)) return *c;
    throw Error("unknown scene category id " + std::to_string(id));
}

void validate_evidence(const FilterEvidence& e) {
    if (e.scene_top5) {
        const auto& top = *e.scene_top5;
        if (top.size() > 5) throw ValidationError("scene_top5", e.id + ": more than 5 predictions");
        for (std::size_t i = 0; i < top.size(); ++i) {
            if (!(top[i].probability >= 0.0 && top[i].probability <= 1.0))
                throw ValidationError("scene_top5", e.id + ": probability outside [0,1]");
            if (i > 0 && top[i].probability > top[i - 1].probability)
                throw ValidationError("scene_top5", e.id + ": not sorted by descending probability");
        }
    }
    if (e.face_boxes) {
        for (const auto& b : *e.face_boxes)
            if (!(b.w >= 0.0 && b.h >= 0.0) || !std::isfinite(b.x) || !std::isfinite(b.y))
                throw ValidationError("faces", e.id + ": box with negative or non-finite extent");
    }
}

double urban_score(std::span<const ScenePrediction> top5, const SceneTaxonomy& taxonomy) {
    double sum = 0.0;
    for (const auto& p : top5)
        if (taxonomy.at(p.category).super == SuperCategory::urban) sum += p.probability;
    return sum;
}

StageDecision scene_filter(const FilterEvidence& evidence, const SceneTaxonomy& taxonomy, double urban_threshold,
                           double blacklist_threshold) {
    if (!evidence.scene_top5) throw MissingEvidenceError(evidence.id, "scene");
    const auto& top = *evidence.scene_top5;
    if (!(urban_score(top, taxonomy) > urban_threshold)) return {false, RejectionReason::non_urban};
    if (!top.empty() && taxonomy.is_blacklisted(top.front().category) &&
        top.front().probability >= blacklist_threshold)
        return {false, RejectionReason::blacklisted_scene};
    return {};
}

bool grey_filter(const PixelSample& sample, const GreyConfig& config) {
    if (sample.channels == 1) return true;
    if (sample.pixels.empty()) throw Error("grey_filter: empty pixel sample");
    std::size_t grey = 0;
    for (const auto& px : sample.pixels) {
        const int lo = std::min({px[0], px[1], px[2]});
        const int hi = std::max({px[0], px[1], px[2]});
        if (hi - lo <= config.max_channel_diff) ++grey;
    }
    return static_cast<double>(grey) >= config.min_grey_fraction * static_cast<double>(sample.pixels.size());
}

DateDecision date_filter(const ImageRecord& record, int cutoff_year) {
    if (!record.captured_at) return {true, true};
    return {*record.captured_at >= Date{cutoff_year, 1, 1}, false};
}

double face_ratio(std::span<const FaceBox> boxes, int width, int height) {
    if (width < 1 || height < 1) throw ValidationError("face_ratio", "image size must be positive");
    struct Rect {
        double x0, y0, x1, y1;
    };
    std::vector<Rect> rects;
    std::vector<double> xs;
    for (const auto& b : boxes) {
        Rect r{std::clamp(b.x, 0.0, double(width)), std::clamp(b.y, 0.0, double(height)),
               std::clamp(b.x + b.w, 0.0, double(width)), std::clamp(b.y + b.h, 0.0, double(height))};
        if (r.x1 <= r.x0 || r.y1 <= r.y0) continue;
        rects.push_back(r);
        xs.push_back(r.x0);
        xs.push_back(r.x1);
    }
    if (rects.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double area = 0.0;
    std::vector<std::pair<double, double>> spans;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double xa = xs[i], xb = xs[i + 1];
        spans.clear();
        for (const auto& r : rects)
            if (r.x0 <= xa && r.x1 >= xb) spans.emplace_back(r.y0, r.y1);
        if (spans.empty()) continue;
        std::sort(spans.begin(), spans.end());
        double covered = 0.0, cur0 = spans[0].first, cur1 = spans[0].second;
        for (std::size_t k = 1; k < spans.size(); ++k) {
            if (spans[k].first > cur1) {
                covered += cur1 - cur0;
                cur0 = spans[k].first;
                cur1 = spans[k].second;
            } else {
                cur1 = std::max(cur1, spans[k].second);
            }
        }
        covered += cur1 - cur0;
        area += covered * (xb - xa);
    }
    return std::min(1.0, area / (double(width) * double(height)));
}

FilterOutcome run_cascade(const ImageRecord& record, const FilterEvidence& evidence, const FilterConfig& config,
                          const SceneTaxonomy& taxonomy) {
    if (evidence.decode_error) throw DecodeError(record.id, *evidence.decode_error);
    FilterOutcome out;
    out.id = record.id;
    auto reject = [&](RejectionReason r) {
        out.kept = false;
        out.reason = r;
        return out;
    };

    if (config.date_stage) {
        auto d = date_filter(record, config.cutoff_year);
        out.date_unknown = d.date_unknown;
        if (!d.pass) return reject(RejectionReason::date);
    }
    if (config.grey_stage) {
        std::optional<bool> grey = evidence.is_grey;
        if (!grey && record.is_color) grey = !*record.is_color;
        if (!grey) throw MissingEvidenceError(record.id, "grey");
        if (*grey) return reject(RejectionReason::grey);
    }
    if (config.scene_stage) {
        if (!evidence.scene_top5) throw MissingEvidenceError(record.id, "scene");
        out.urban_probability = urban_score(*evidence.scene_top5, taxonomy);
        auto s = scene_filter(evidence, taxonomy, config.urban_threshold, config.blacklist_threshold);
        if (!s.pass) return reject(*s.reason);
    }
    if (config.face_stage) {
        if (!evidence.face_boxes) throw MissingEvidenceError(record.id, "face");
        out.face_ratio = face_ratio(*evidence.face_boxes, record.width, record.height);
        if (out.face_ratio > config.face_threshold) return reject(RejectionReason::face_area);
    }
    out.kept = true;
    return out;
}

FilterStats::FilterStats() {
    for (auto r : kAllReasons) rejected[std::string(to_string(r))] = 0;
}

std::size_t FilterStats::rejected_total() const {
    std::size_t n = 0;
    for (auto& [_, v] : rejected) n += v;
    return n;
}

FilterStats& FilterStats::merge(const FilterStats& o) {
    total += o.total;
    kept += o.kept;
    for (auto& [k, v] : o.rejected) rejected[k] += v;
    date_unknown += o.date_unknown;
    needs_evidence += o.needs_evidence;
    decode_errors += o.decode_errors;
    return *this;
}

nlohmann::json FilterStats::to_json() const {
    return {{"total", total},
            {"kept", kept},
            {"rejected", rejected},
            {"rejected_total", rejected_total()},
            {"date_unknown", date_unknown},
            {"needs_evidence", needs_evidence},
            {"decode_errors", decode_errors}};
}

FilterStats cascade_report(std::span<const FilterOutcome> outcomes) {
    FilterStats s;
    for (const auto& o : outcomes) {
        ++s.total;
        if (o.kept) {
            ++s.kept;
        } else if (o.reason) {
            ++s.rejected[std::string(to_string(*o.reason))];
        }
        if (o.date_unknown) ++s.date_unknown;
    }
    return s;
}

EvidenceStore::ReadResult EvidenceStore::read(std::istream& in) {
    ReadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string())
            throw ParseError("evidence row needs a string 'id'", line_no);

        const auto id = obj["id"].get<std::string>();
        FilterEvidence e;
        if (const auto* existing = find(id)) e = *existing;
        e.id = id;

        for (auto& [key, value] : obj.items()) {
            if (key == "id") continue;
            if (key == "scene_top5") {
                if (!value.is_array()) throw ParseError("scene_top5 must be an array", line_no);
                std::vector<ScenePrediction> top;
                for (const auto& p : value) {
                    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number())
                        throw ParseError("scene_top5 entries must be [category_id, probability]", line_no);
                    top.push_back({p[0].get<int>(), p[1].get<double>()});
                }
                e.scene_top5 = std::move(top);
            } else if (key == "faces") {
                if (!value.is_array()) throw ParseError("faces must be an array", line_no);
                std::vector<FaceBox> boxes;
                for (const auto& b : value) {
                    if (!b.is_array() || b.size() != 4 ||
                        !std::all_of(b.begin(), b.end(), [](const auto& v) { return v.is_number(); }))
                        throw ParseError("faces entries must be [x, y, w, h]", line_no);
                    boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
                }
                e.face_boxes = std::move(boxes);
            } else if (key == "is_grey") {
                if (!value.is_boolean()) throw ParseError("is_grey must be a boolean", line_no);
                e.is_grey = value.get<bool>();
            } else if (key == "error") {
                if (!value.is_string()) throw ParseError("error must be a string", line_no);
                e.decode_error = value.get<std::string>();
            } else {
                result.warnings.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        }
        try {
            validate_evidence(e);
        } catch (const ValidationError& err) {
            throw ParseError(err.what(), line_no);
        }
        by_id_[id] = std::move(e);
        ++result.rows;
    }
    return result;
}

EvidenceStore::ReadResult EvidenceStore::read(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void EvidenceStore::put(FilterEvidence evidence) {
    validate_evidence(evidence);
    auto id = evidence.id;
    by_id_[id] = std::move(evidence);
}

const FilterEvidence* EvidenceStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &it->second;
}

CascadeBatch run_cascade_batch(std::span<const ImageRecord> records, const EvidenceStore& evidence,
                               const FilterConfig& config, const SceneTaxonomy& taxonomy, unsigned workers) {
    enum class Kind { outcome, missing, decode, skipped };
    struct Slot {
        Kind kind = Kind::skipped;
        FilterOutcome outcome;
        std::string detail;
    };
    std::vector<Slot> slots(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) {
        const auto& r = records[i];
        if (r.status == Status::rejected) return;
        const FilterEvidence empty{r.id, {}, {}, {}, {}};
        const auto* e = evidence.find(r.id);
        try {
            slots[i].outcome = run_cascade(r, e ? *e : empty, config, taxonomy);
            slots[i].kind = Kind::outcome;
        } catch (const MissingEvidenceError& err) {
            slots[i].kind = Kind::missing;
            slots[i].detail = err.stage();
        } catch (const DecodeError& err) {
            slots[i].kind = Kind::decode;
            slots[i].detail = err.what();
        }
    });

    CascadeBatch batch;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        switch (slots[i].kind) {
        case Kind::outcome: batch.outcomes.push_back(std::move(slots[i].outcome)); break;
        case Kind::missing: batch.needs_evidence.push_back(records[i].id); break;
        case Kind::decode: batch.decode_errors.emplace_back(records[i].id, slots[i].detail); break;
        case Kind::skipped: break;
        }
    }
    std::sort(batch.needs_evidence.begin(), batch.needs_evidence.end());
    std::sort(batch.decode_errors.begin(), batch.decode_errors.end());
    batch.stats = cascade_report(batch.outcomes);
    batch.stats.needs_evidence = batch.needs_evidence.size();
    batch.stats.decode_errors = batch.decode_errors.size();
    return batch;
}

}  // namespace geocurate
