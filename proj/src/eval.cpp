#include "geocurate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "geocurate/error.hpp"
#include "geocurate/io.hpp"

namespace geocurate {

namespace {

using nlohmann::json;

constexpr std::array kStrategyNames{"average",   "max",       "single_UL", "single_UR",
                                    "single_LL", "single_LR", "single_C",  "resize224"};
constexpr std::array kStrategyLabels{"Averaging",        "Max fusion",        "Upper left crop", "Upper right crop",
                                     "Lower left crop",  "Lower right crop",  "Central crop",    "Resize to 224"};
constexpr std::array kCropNames{"UL", "UR", "LL", "LR", "C"};
constexpr std::array kLayoutNames{"five_crop", "single", "gps"};

// Table rows for a five-crop file: single crops, then max, then averaging.
constexpr std::array kFiveCropRows{FusionStrategy::single_UL, FusionStrategy::single_UR, FusionStrategy::single_LL,
                                   FusionStrategy::single_LR, FusionStrategy::single_C,  FusionStrategy::max,
                                   FusionStrategy::average};

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void check_vector(const ScoreVector& v, std::size_t n, const std::string& id, std::size_t line_no) {
    if (v.size() != n)
        throw ParseError(id + ": vector has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n),
                         line_no);
    double sum = 0.0;
    for (double p : v) {
        if (!(p >= 0.0 && p <= 1.0)) throw ParseError(id + ": probability outside [0,1]", line_no);
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
        throw ParseError(id + ": probabilities sum to " + std::to_string(sum), line_no);
}

}  // namespace

std::string_view to_string(CropPosition p) { return kCropNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(FusionStrategy s) { return kStrategyNames[static_cast<std::size_t>(s)]; }
std::string_view display_name(FusionStrategy s) { return kStrategyLabels[static_cast<std::size_t>(s)]; }
std::string_view to_string(PredictionLayout l) { return kLayoutNames[static_cast<std::size_t>(l)]; }

std::optional<FusionStrategy> parse_fusion_strategy(std::string_view s) {
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
        if (s == kStrategyNames[i]) return static_cast<FusionStrategy>(i);
    return std::nullopt;
}

CropPlan crop_plan(int width, int height) {
    if (width < 1 || height < 1) throw ValidationError("size", "width and height must be >= 1");
    CropPlan plan;
    if (width <= height) {
        plan.resized = {kCropResizeMin, scale_round_half_up(height, kCropResizeMin, width)};
    } else {
        plan.resized = {scale_round_half_up(width, kCropResizeMin, height), kCropResizeMin};
    }
    const int W = plan.resized.width, H = plan.resized.height;
    const int right = W - kCropSize, bottom = H - kCropSize;
    plan.crops = {CropRect{CropPosition::UL, 0, 0}, CropRect{CropPosition::UR, right, 0},
                  CropRect{CropPosition::LL, 0, bottom}, CropRect{CropPosition::LR, right, bottom},
                  CropRect{CropPosition::C, right / 2, bottom / 2}};
    return plan;
}

json to_json(const CropPlan& plan) {
    json crops = json::array();
    for (const auto& c : plan.crops)
        crops.push_back({{"pos", to_string(c.position)}, {"x", c.x}, {"y", c.y}, {"w", c.width}, {"h", c.height}});
    return {{"resized", {plan.resized.width, plan.resized.height}}, {"crops", crops}};
}

int argmax(std::span<const double> scores) {
    if (scores.empty()) throw Error("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<int>(best);
}

FusedScore fuse_scores(std::span<const ScoreVector> vectors, FusionStrategy strategy) {
    const std::size_t expected = strategy == FusionStrategy::resize224 ? 1 : 5;
    if (vectors.size() != expected)
        throw Error("strategy " + std::string(to_string(strategy)) + " needs " + std::to_string(expected) +
                    " score vectors, got " + std::to_string(vectors.size()));
    const std::size_t n = vectors[0].size();
    if (n == 0) throw Error("empty score vector");
    for (const auto& v : vectors)
        if (v.size() != n) throw Error("score vectors differ in length");

    FusedScore out;
    switch (strategy) {
    case FusionStrategy::average:
        out.scores.assign(n, 0.0);
        for (const auto& v : vectors)
            for (std::size_t i = 0; i < n; ++i) out.scores[i] += v[i];
        for (auto& s : out.scores) s /= double(vectors.size());
        break;
    case FusionStrategy::max:
        out.scores = vectors[0];
        for (const auto& v : vectors)
            for (std::size_t i = 0; i < n; ++i) out.scores[i] = std::max(out.scores[i], v[i]);
        break;
    case FusionStrategy::single_UL:
    case FusionStrategy::single_UR:
    case FusionStrategy::single_LL:
    case FusionStrategy::single_LR:
    case FusionStrategy::single_C:
        out.scores = vectors[static_cast<std::size_t>(strategy) - static_cast<std::size_t>(FusionStrategy::single_UL)];
        break;
    case FusionStrategy::resize224: out.scores = vectors[0]; break;
    }
    out.predicted = argmax(out.scores);
    return out;
}

int rank_of(std::span<const double> scores, int true_class) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= scores.size())
        throw ValidationError("true_class", "out of range");
    const double s = scores[static_cast<std::size_t>(true_class)];
    int rank = 1;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (scores[c] > s || (scores[c] == s && static_cast<int>(c) < true_class)) ++rank;
    }
    return rank;
}

std::vector<RankedOutcome> rank_predictions(std::span<const PredictionRecord> records, FusionStrategy strategy) {
    std::vector<RankedOutcome> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto fused = fuse_scores(r.vectors, strategy);
        out.push_back({r.true_class, fused.predicted, rank_of(fused.scores, r.true_class)});
    }
    return out;
}

double topk_accuracy(std::span<const RankedOutcome> outcomes, int k, int num_classes) {
    if (k < 1) throw ValidationError("k", "must be >= 1");
    if (k > num_classes)
        throw ValidationError("k", "k = " + std::to_string(k) + " exceeds " + std::to_string(num_classes) + " classes");
    if (outcomes.empty()) throw Error("no predictions");
    std::size_t hits = 0;
    for (const auto& o : outcomes)
        if (o.rank && *o.rank <= k) ++hits;
    return double(hits) / double(outcomes.size());
}

double topk_accuracy(std::span<const PredictionRecord> records, int k, FusionStrategy strategy) {
    if (records.empty()) throw Error("no predictions");
    const auto outcomes = rank_predictions(records, strategy);
    return topk_accuracy(outcomes, k, static_cast<int>(records.front().vectors.front().size()));
}

double balanced_accuracy(std::span<const RankedOutcome> outcomes) {
    if (outcomes.empty()) throw Error("balanced accuracy of an empty prediction set");
    std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
    for (const auto& o : outcomes) {
        auto& [correct, total] = per_class[o.true_class];
        ++total;
        if (o.predicted == o.true_class) ++correct;
    }
    double sum = 0.0;
    for (const auto& [_, ct] : per_class) sum += double(ct.first) / double(ct.second);
    return sum / double(per_class.size());
}

CoordsToClassResult coords_to_class(std::span<const GpsPrediction> predictions, const CountryPolygonSet& boundaries,
                                    const ClassGrouping& grouping, double fallback_km) {
    CoordsToClassResult result;
    result.outcomes.reserve(predictions.size());
    for (const auto& p : predictions) {
        std::vector<int> ranking;
        for (const auto& h : p.hypotheses) {
            auto code = assign_country(h.lat, h.lon, boundaries, fallback_km);
            if (!code) continue;
            const int cls = map_country_to_class(*code, grouping);
            if (std::find(ranking.begin(), ranking.end(), cls) == ranking.end()) ranking.push_back(cls);
        }
        RankedOutcome o{p.true_class, ranking.empty() ? -1 : ranking.front(), std::nullopt};
        auto it = std::find(ranking.begin(), ranking.end(), p.true_class);
        if (it != ranking.end()) o.rank = static_cast<int>(it - ranking.begin()) + 1;
        if (ranking.empty()) ++result.unassigned;
        result.outcomes.push_back(o);
    }
    return result;
}

PredictionFile read_prediction_file(std::istream& in) {
    PredictionFile file;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = trim(line);
        if (body.empty()) continue;
        json obj;
        try {
            obj = json::parse(body);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);

        if (!have_header) {
            if (!obj.contains("header") || !obj["header"].is_object())
                throw ParseError("first line must be a {\"header\": {...}} object", line_no);
            const auto& h = obj["header"];
            if (!h.contains("num_classes") || !h["num_classes"].is_number_integer() || h["num_classes"].get<int>() < 1)
                throw ParseError("header.num_classes must be a positive integer", line_no);
            file.num_classes = h["num_classes"].get<int>();
            const auto layout = h.value("layout", std::string("five_crop"));
            if (layout == "five_crop") {
                file.layout = PredictionLayout::five_crop;
            } else if (layout == "single") {
                file.layout = PredictionLayout::single;
            } else if (layout == "gps") {
                file.layout = PredictionLayout::gps;
            } else {
                throw ParseError("unknown layout '" + layout + "'", line_no);
            }
            if (h.contains("crop_order")) {
                json expected = json::array();
                for (auto name : kCropNames) expected.push_back(name);
                if (h["crop_order"] != expected) throw ParseError("crop_order must be [UL, UR, LL, LR, C]", line_no);
            }
            if (h.contains("strategy")) {
                auto s = parse_fusion_strategy(h["strategy"].get<std::string>());
                if (!s) throw ParseError("unknown strategy", line_no);
                file.strategy = s;
            }
            file.method = h.value("method", std::string());
            for (auto& [key, _] : h.items())
                if (key != "num_classes" && key != "layout" && key != "crop_order" && key != "strategy" &&
                    key != "method" && key != "scores")
                    file.warnings.push_back("header: unknown key '" + key + "'");
            have_header = true;
            continue;
        }

        if (!obj.contains("id") || !obj["id"].is_string()) throw ParseError("record needs a string 'id'", line_no);
        if (!obj.contains("true_class") || !obj["true_class"].is_number_integer())
            throw ParseError("record needs an integer 'true_class'", line_no);
        const auto id = obj["id"].get<std::string>();
        const int truth = obj["true_class"].get<int>();
        if (truth < 0 || truth >= file.num_classes) throw ParseError(id + ": true_class out of range", line_no);
        for (auto& [key, _] : obj.items())
            if (key != "id" && key != "true_class" && key != "scores" && key != "gps")
                file.warnings.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");

        if (file.layout == PredictionLayout::gps) {
            if (!obj.contains("gps") || !obj["gps"].is_array()) throw ParseError(id + ": missing 'gps' list", line_no);
            GpsPrediction g{id, truth, {}};
            for (const auto& pt : obj["gps"]) {
                if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
                    throw ParseError(id + ": gps entries must be [lat, lon]", line_no);
                const double lat = pt[0].get<double>(), lon = pt[1].get<double>();
                if (lat < -90 || lat > 90 || lon < -180 || lon > 180) throw ParseError(id + ": gps out of range", line_no);
                g.hypotheses.push_back({lat, lon == 180.0 ? -180.0 : lon});
            }
            file.gps.push_back(std::move(g));
            continue;
        }

        if (!obj.contains("scores") || !obj["scores"].is_array()) throw ParseError(id + ": missing 'scores'", line_no);
        PredictionRecord r{id, truth, {}};
        const auto& scores = obj["scores"];
        const auto n = static_cast<std::size_t>(file.num_classes);
        if (file.layout == PredictionLayout::five_crop) {
            if (scores.size() != 5) throw ParseError(id + ": five_crop layout needs 5 score vectors", line_no);
            for (const auto& v : scores) {
                if (!v.is_array()) throw ParseError(id + ": score vector must be an array", line_no);
                r.vectors.push_back(v.get<ScoreVector>());
            }
        } else {
            r.vectors.push_back(scores.get<ScoreVector>());
        }
        for (const auto& v : r.vectors) check_vector(v, n, id, line_no);
        file.records.push_back(std::move(r));
    }
    if (!have_header) throw ParseError("prediction file has no header");
    return file;
}

PredictionFile read_prediction_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return read_prediction_file(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_prediction_file(std::ostream& out, const PredictionFile& file) {
    json header{{"num_classes", file.num_classes}, {"layout", to_string(file.layout)}, {"scores", "probabilities"}};
    if (file.layout == PredictionLayout::five_crop) header["crop_order"] = kCropNames;
    if (!file.method.empty()) header["method"] = file.method;
    if (file.strategy) header["strategy"] = to_string(*file.strategy);
    out << json{{"header", header}}.dump() << '\n';
    if (file.layout == PredictionLayout::gps) {
        for (const auto& g : file.gps) {
            json pts = json::array();
            for (const auto& h : g.hypotheses) pts.push_back({h.lat, h.lon});
            out << json{{"id", g.id}, {"true_class", g.true_class}, {"gps", pts}}.dump() << '\n';
        }
        return;
    }
    for (const auto& r : file.records) {
        json scores = file.layout == PredictionLayout::five_crop ? json(r.vectors) : json(r.vectors.at(0));
        out << json{{"id", r.id}, {"true_class", r.true_class}, {"scores", scores}}.dump() << '\n';
    }
}

MetricRow evaluate(std::string method, std::string set, std::span<const RankedOutcome> outcomes, int num_classes,
                   std::span<const int> ks) {
    MetricRow row;
    row.method = std::move(method);
    row.set = std::move(set);
    row.count = outcomes.size();
    for (int k : ks) {
        if (k > num_classes) {
            row.topk[k] = std::nullopt;
        } else {
            row.topk[k] = topk_accuracy(outcomes, k, num_classes);
        }
    }
    row.balanced = balanced_accuracy(outcomes);
    std::map<int, std::pair<std::size_t, std::size_t>> recall;
    for (const auto& o : outcomes) {
        ++row.confusion[o.true_class][o.predicted];
        auto& [correct, total] = recall[o.true_class];
        ++total;
        if (o.predicted == o.true_class) ++correct;
        if (!o.rank && o.predicted < 0) ++row.unassigned;
    }
    for (const auto& [c, ct] : recall) row.per_class_recall[c] = double(ct.first) / double(ct.second);
    return row;
}

json EvalReport::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        json topk = json::object();
        for (const auto& [k, v] : r.topk) topk["top" + std::to_string(k)] = v ? json(*v) : json(nullptr);
        json recall = json::object();
        for (const auto& [c, v] : r.per_class_recall) recall[std::to_string(c)] = v;
        json confusion = json::object();
        for (const auto& [t, preds] : r.confusion) {
            json p = json::object();
            for (const auto& [c, n] : preds) p[std::to_string(c)] = n;
            confusion[std::to_string(t)] = p;
        }
        rows_json.push_back({{"method", r.method},
                             {"set", r.set},
                             {"count", r.count},
                             {"topk", topk},
                             {"balanced", r.balanced},
                             {"per_class_recall", recall},
                             {"confusion", confusion},
                             {"unassigned", r.unassigned}});
    }
    return {{"format", "geocurate-eval-report"},
            {"version", 1},
            {"fusion_input", "probabilities"},
            {"tie_break", "ascending class id"},
            {"ks", ks},
            {"rows", rows_json}};
}

EvalReport EvalReport::from_json(const json& doc) {
    if (!doc.is_object() || doc.value("format", "") != "geocurate-eval-report")
        throw ParseError("not an evaluation report");
    EvalReport rep;
    rep.ks = doc.at("ks").get<std::vector<int>>();
    for (const auto& r : doc.at("rows")) {
        MetricRow row;
        row.method = r.at("method").get<std::string>();
        row.set = r.at("set").get<std::string>();
        row.count = r.at("count").get<std::size_t>();
        for (int k : rep.ks) {
            const auto& v = r.at("topk").at("top" + std::to_string(k));
            row.topk[k] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        }
        row.balanced = r.at("balanced").get<double>();
        for (auto& [c, v] : r.at("per_class_recall").items()) row.per_class_recall[std::stoi(c)] = v.get<double>();
        for (auto& [t, preds] : r.at("confusion").items())
            for (auto& [c, n] : preds.items()) row.confusion[std::stoi(t)][std::stoi(c)] = n.get<std::size_t>();
        row.unassigned = r.at("unassigned").get<std::size_t>();
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

std::string EvalReport::table() const {
    std::vector<std::string> sets, methods;
    for (const auto& r : rows) {
        if (std::find(sets.begin(), sets.end(), r.set) == sets.end()) sets.push_back(r.set);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    }
    auto find_row = [&](const std::string& m, const std::string& s) -> const MetricRow* {
        for (const auto& r : rows)
            if (r.method == m && r.set == s) return &r;
        return nullptr;
    };

    const std::size_t group = ks.size() + 1;
    std::vector<std::string> titles;
    std::vector<std::string> head{"Method"};
    for (const auto& s : sets) {
        std::set<std::size_t> counts;
        for (const auto& r : rows)
            if (r.set == s) counts.insert(r.count);
        // image count only when every row of the set saw the same images
        titles.push_back(counts.size() == 1 ? s + " (" + std::to_string(*counts.begin()) + " images)" : s);
        for (int k : ks) head.push_back("Top-" + std::to_string(k));
        head.push_back("Bal");
    }
    std::vector<std::vector<std::string>> body;
    for (const auto& m : methods) {
        std::vector<std::string> line{m};
        for (const auto& s : sets) {
            const auto* r = find_row(m, s);
            for (int k : ks) {
                std::string cell = "-";
                if (r) {
                    auto it = r->topk.find(k);
                    if (it != r->topk.end() && it->second) cell = fmt2(*it->second);
                }
                line.push_back(cell);
            }
            line.push_back(r ? fmt2(r->balanced) : "-");
        }
        body.push_back(std::move(line));
    }

    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& line : body) width[c] = std::max(width[c], line[c].size());
    }
    auto group_width = [&](std::size_t g) {
        std::size_t w = 2 * (group - 1);
        for (std::size_t c = 0; c < group; ++c) w += width[1 + g * group + c];
        return w;
    };
    for (std::size_t g = 0; g < sets.size(); ++g)
        while (group_width(g) < titles[g].size()) ++width[(g + 1) * group];

    auto pad_left = [](const std::string& s, std::size_t w) { return std::string(w - s.size(), ' ') + s; };
    auto pad_right = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
    auto render = [&](const std::vector<std::string>& line) {
        std::string out = pad_right(line[0], width[0]);
        for (std::size_t c = 1; c < line.size(); ++c)
            out += ((c - 1) % group == 0 ? " | " : "  ") + pad_left(line[c], width[c]);
        return out;
    };

    std::ostringstream out;
    std::string top = std::string(width[0], ' ');
    for (std::size_t g = 0; g < sets.size(); ++g) top += " | " + pad_right(titles[g], group_width(g));
    const std::string header_line = render(head);
    out << top << '\n' << header_line << '\n' << std::string(header_line.size(), '-') << '\n';
    for (const auto& line : body) out << render(line) << '\n';
    return out.str();
}

void add_rows(EvalReport& report, const std::string& set, const PredictionFile& file,
              const CountryPolygonSet* boundaries, const ClassGrouping* grouping, double fallback_km) {
    switch (file.layout) {
    case PredictionLayout::five_crop:
        for (auto s : kFiveCropRows) {
            auto outcomes = rank_predictions(file.records, s);
            report.rows.push_back(evaluate(std::string(display_name(s)), set, outcomes, file.num_classes, report.ks));
        }
        break;
    case PredictionLayout::single: {
        auto outcomes = rank_predictions(file.records, FusionStrategy::resize224);
        auto label = file.method.empty() ? std::string(display_name(FusionStrategy::resize224)) : file.method;
        report.rows.push_back(evaluate(label, set, outcomes, file.num_classes, report.ks));
        break;
    }
    case PredictionLayout::gps: {
        if (!boundaries || !grouping) throw Error("GPS predictions need boundaries and a grouping");
        if (grouping->num_classes != file.num_classes)
            throw ValidationError("num_classes", "prediction file declares " + std::to_string(file.num_classes) +
                                                     " classes, grouping has " +
                                                     std::to_string(grouping->num_classes));
        auto mapped = coords_to_class(file.gps, *boundaries, *grouping, fallback_km);
        auto label = file.method.empty() ? std::string("GPS to country") : file.method;
        auto row = evaluate(label, set, mapped.outcomes, file.num_classes, report.ks);
        row.unassigned = mapped.unassigned;
        report.rows.push_back(std::move(row));
        break;
    }
    }
}

}  // namespace geocurate
