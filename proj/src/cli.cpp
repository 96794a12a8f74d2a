#include "geocurate/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "geocurate/config.hpp"
#include "geocurate/dataset_ops.hpp"
#include "geocurate/eval.hpp"
#include "geocurate/filters.hpp"
#include "geocurate/geo.hpp"
#include "geocurate/grouping.hpp"
#include "geocurate/io.hpp"
#include "geocurate/manifest.hpp"
#include "geocurate/normalize.hpp"
#include "geocurate/parallel.hpp"
#include "geocurate/querygen.hpp"

namespace geocurate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream& log() { return std::cerr; }

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void save_manifest(const fs::path& path, const Manifest& m) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_manifest(path, m);
}

fs::path require_path(const std::optional<fs::path>& p, const char* what) {
    if (!p) throw ConfigError(what, "not set (use the flag or the config file)");
    if (!fs::exists(*p)) throw Error(std::string(what) + ": no such file: " + p->string());
    return *p;
}

void refuse_in_place(const fs::path& in, const fs::path& out) {
    std::error_code ec;
    if (in == out || (fs::exists(out) && fs::equivalent(in, out, ec)))
        throw Error("output " + out.string() + " would overwrite the input manifest");
}


// Values collected from flags; optionals mean "fall back to the config".
struct Flags {
    fs::path config;
    std::optional<unsigned> workers;

    fs::path in, out;
    std::optional<fs::path> cities, keywords, boundaries, taxonomy, blacklist, grouping, images;

    // gen-queries
    std::optional<std::int64_t> min_population;
    std::optional<double> half_width_km;
    fs::path bboxes_out;
    bool count_only = false, no_dedup = false;

    // assign-country / eval
    std::optional<double> fallback_km;

    // filter
    std::vector<fs::path> evidence;
    fs::path report_out, queue_out;
    std::optional<double> urban, face, blacklist_thr;
    std::optional<int> cutoff_year;

    // normalize
    fs::path out_images, crop_plans;
    int min_dimension = kStorageMinDimension;
    int quality = kJpegQuality;

    // group
    std::optional<int> classes;
    std::optional<std::uint64_t> min_images;
    fs::path grouping_out, trace_out;

    // split
    std::optional<std::string> ratios;
    std::optional<std::uint64_t> seed;

    // weights
    std::optional<std::string> only_split;
    bool rescale = false;

    // eval / report / validate
    std::vector<std::string> predictions;
    std::vector<fs::path> eval_reports, manifests;
    std::vector<int> ks{1, 3, 5, 10};
    fs::path json_out, table_out, stats_out;
    bool strict = false;
};

PipelineConfig resolve_config(const Flags& f) {
    PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : load_config(f.config);
    auto over = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    over(cfg.paths.cities, f.cities);
    over(cfg.paths.keywords, f.keywords);
    over(cfg.paths.boundaries, f.boundaries);
    over(cfg.paths.taxonomy, f.taxonomy);
    over(cfg.paths.blacklist, f.blacklist);
    over(cfg.paths.grouping, f.grouping);
    over(cfg.paths.images, f.images);
    over(cfg.min_population, f.min_population);
    over(cfg.bbox_half_width_km, f.half_width_km);
    over(cfg.fallback_km, f.fallback_km);
    over(cfg.filter.urban_threshold, f.urban);
    over(cfg.filter.face_threshold, f.face);
    over(cfg.filter.blacklist_threshold, f.blacklist_thr);
    over(cfg.filter.cutoff_year, f.cutoff_year);
    over(cfg.num_classes, f.classes);
    over(cfg.min_images, f.min_images);
    over(cfg.split.seed, f.seed);
    over(cfg.workers, f.workers);
    if (f.ratios) {
        try {
            cfg.split.ratios = parse_split_ratios(*f.ratios);
        } catch (const Error& e) {
            throw ConfigError("split.ratios", e.what());
        }
    }
    cfg.validate();
    if (cfg.workers == 0) cfg.workers = default_workers();
    return cfg;
}

// ---- commands -------------------------------------------------------------

int cmd_gen_queries(const Flags& f, const PipelineConfig& cfg) {
    const auto cities = load_city_table(require_path(cfg.paths.cities, "paths.cities"), cfg.min_population);
    const auto keywords = load_keywords(require_path(cfg.paths.keywords, "paths.keywords"));
    log() << "cities: " << cities.size() << " (population >= " << cfg.min_population << ")\n"
          << "keywords: " << keywords.size() << "\n";

    if (f.count_only) {
        log() << "raw queries: " << count_keyword_queries(cities, keywords) << "\n";
        return kExitOk;
    }
    if (f.out.empty()) throw Error("gen-queries needs --out unless --count-only is given");

    std::ostringstream text;
    const auto counts =
        generate_keyword_queries(cities, keywords, [&](const std::string& q) { text << q << '\n'; }, !f.no_dedup);
    write_text(f.out, text.str());
    log() << "raw queries: " << counts.raw << "\ndeduplicated: " << counts.deduplicated << "\n";

    if (!f.bboxes_out.empty()) {
        std::ostringstream boxes;
        for (const auto& c : cities) {
            json row{{"city", c.name}, {"country_code", c.country_code}, {"lat", c.lat}, {"lon", c.lon}};
            auto& arr = row["boxes"] = json::array();
            for (const auto& b : bbox_around(c.lat, c.lon, cfg.bbox_half_width_km))
                arr.push_back({{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min},
                               {"lon_max", b.lon_max}});
            boxes << row.dump() << '\n';
        }
        write_text(f.bboxes_out, boxes.str());
        log() << "bounding boxes: " << cities.size() << " cities, half-width " << cfg.bbox_half_width_km << " km\n";
    }
    return kExitOk;
}

int cmd_assign_country(const Flags& f, const PipelineConfig& cfg) {
    refuse_in_place(f.in, f.out);
    auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);
    const auto boundaries = load_boundaries(require_path(cfg.paths.boundaries, "paths.boundaries"));

    auto& recs = manifest.records;
    std::vector<std::optional<std::string>> codes(recs.size());
    parallel_for(recs.size(), cfg.workers, [&](std::size_t i) {
        if (recs[i].status != Status::rejected)
            codes[i] = assign_country(recs[i].lat, recs[i].lon, boundaries, cfg.fallback_km);
    });
    std::size_t assigned = 0, unassigned = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].status == Status::rejected) continue;
        if (codes[i]) {
            recs[i].country_code = codes[i];
            ++assigned;
        } else {
            recs[i].country_code.reset();
            recs[i].reject(RejectionReason::unassignable_gps);
            ++unassigned;
        }
    }
    std::ostringstream fb;
    fb << cfg.fallback_km;
    manifest.set_header("country_fallback_km", fb.str());
    save_manifest(f.out, manifest);
    log() << "assigned: " << assigned << "\nunassignable_gps: " << unassigned << "\n";
    return kExitOk;
}

SceneTaxonomy load_taxonomy(const PipelineConfig& cfg) {
    auto tax = SceneTaxonomy::load(require_path(cfg.paths.taxonomy, "paths.taxonomy"));
    if (cfg.paths.blacklist) tax.load_blacklist(require_path(cfg.paths.blacklist, "paths.blacklist"));
    return tax;
}

int cmd_filter(const Flags& f, const PipelineConfig& cfg) {
    refuse_in_place(f.in, f.out);
    for (const auto& path : f.evidence)
        if (!fs::exists(path)) throw Error("evidence file not found: " + path.string());
    auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);
    const auto taxonomy = load_taxonomy(cfg);

    EvidenceStore store;
    for (const auto& path : f.evidence) {
        auto res = store.read(path);
        log() << "evidence: " << path.string() << " (" << res.rows << " rows)\n";
        for (const auto& w : res.warnings) log() << "warning: " << path.string() << ": " << w << "\n";
    }

    auto& recs = manifest.records;
    // Grey check from pixels for images the scorer did not flag.
    if (cfg.paths.images && cfg.filter.grey_stage) {
        std::vector<std::optional<bool>> grey(recs.size());
        std::vector<std::string> errors(recs.size());
        parallel_for(recs.size(), cfg.workers, [&](std::size_t i) {
            const auto& r = recs[i];
            if (r.status == Status::rejected) return;
            const auto* e = store.find(r.id);
            if (e && (e->is_grey || e->decode_error)) return;
            fs::path src = r.path;
            if (src.is_relative()) src = *cfg.paths.images / src;
            try {
                grey[i] = grey_filter(sample_pixels(read_bytes(src), cfg.filter.grey.min_samples), cfg.filter.grey);
            } catch (const std::exception& ex) {
                errors[i] = ex.what();
            }
        });
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (!grey[i] && errors[i].empty()) continue;
            const auto* e = store.find(recs[i].id);
            FilterEvidence ev = e ? *e : FilterEvidence{recs[i].id, {}, {}, {}, {}};
            if (grey[i]) ev.is_grey = grey[i];
            else ev.decode_error = errors[i];
            store.put(std::move(ev));
        }
    }

    const auto batch = run_cascade_batch(recs, store, cfg.filter, taxonomy, cfg.workers);
    std::map<std::string, const FilterOutcome*> by_id;
    for (const auto& o : batch.outcomes) by_id[o.id] = &o;
    for (auto& r : recs) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) continue;
        if (it->second->kept) {
            r.status = Status::kept;
            r.rejection_reason.reset();
        } else {
            r.reject(*it->second->reason);
        }
    }
    std::ostringstream thr;
    thr << "urban>" << cfg.filter.urban_threshold << " blacklist>=" << cfg.filter.blacklist_threshold
        << " face>" << cfg.filter.face_threshold << " cutoff=" << cfg.filter.cutoff_year
        << " grey=" << cfg.filter.grey.max_channel_diff << "/" << cfg.filter.grey.min_grey_fraction;
    manifest.set_header("filter", thr.str());
    save_manifest(f.out, manifest);

    if (!f.report_out.empty()) {
        auto doc = batch.stats.to_json();
        doc["decode_error_ids"] = json::array();
        for (const auto& [id, msg] : batch.decode_errors) doc["decode_error_ids"].push_back({{"id", id}, {"error", msg}});
        write_json(f.report_out, doc);
    }
    if (!f.queue_out.empty()) {
        std::string q;
        for (const auto& id : batch.needs_evidence) q += id + "\n";
        write_text(f.queue_out, q);
    }
    log() << "kept: " << batch.stats.kept << "\nrejected: " << batch.stats.rejected_total() << "\n";
    for (const auto& [reason, n] : batch.stats.rejected) log() << "  " << reason << ": " << n << "\n";
    log() << "needs evidence: " << batch.needs_evidence.size() << "\ndecode errors: " << batch.decode_errors.size()
          << "\n";
    return kExitOk;
}

int cmd_normalize(const Flags& f, const PipelineConfig& cfg) {
    refuse_in_place(f.in, f.out);
    auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);
    const auto images = require_path(cfg.paths.images, "paths.images");
    if (f.out_images.empty()) throw Error("normalize needs --out-images");

    const auto res = normalize_batch(manifest, images, f.out_images, cfg.workers, f.min_dimension, f.quality);
    save_manifest(f.out, manifest);
    if (!f.crop_plans.empty()) {
        std::vector<const ImageRecord*> done;
        for (const auto& r : manifest.records)
            if (r.status != Status::rejected && r.width > 0 && r.height > 0) done.push_back(&r);
        std::sort(done.begin(), done.end(), [](auto* a, auto* b) { return a->id < b->id; });
        std::ostringstream text;
        for (const auto* r : done) {
            json row = to_json(crop_plan(r->width, r->height));
            row["id"] = r->id;
            text << row.dump() << '\n';
        }
        write_text(f.crop_plans, text.str());
    }
    log() << "written: " << res.written << " (resized " << res.resized << ")\n";
    for (const auto& [id, msg] : res.failures) log() << "error: " << id << ": " << msg << "\n";
    return res.failures.empty() ? kExitOk : kExitData;
}

int cmd_group(const Flags& f, const PipelineConfig& cfg) {
    refuse_in_place(f.in, f.out);
    auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);

    ClassGrouping grouping;
    auto load_from = f.grouping;
    if (!load_from && f.grouping_out.empty()) load_from = cfg.paths.grouping;
    if (load_from) {
        grouping = load_grouping(*load_from);
        log() << "grouping: " << load_from->string() << " (K = " << grouping.num_classes << ")\n";
    } else {
        const auto boundaries = load_boundaries(require_path(cfg.paths.boundaries, "paths.boundaries"));
        struct Acc {
            std::uint64_t count = 0;
            double lat = 0, lon = 0;
        };
        std::map<std::string, Acc> acc;
        for (const auto& c : boundaries.countries()) acc[c.code];
        for (const auto& r : manifest.records) {
            if (r.status != Status::kept || !r.country_code) continue;
            auto& a = acc[*r.country_code];
            ++a.count;
            a.lat += r.lat;
            a.lon += r.lon;
        }
        std::vector<CountryStat> stats;
        for (const auto& [code, a] : acc) {
            LatLon centroid;
            if (const auto* c = boundaries.find(code)) centroid = c->centroid;
            else centroid = {a.lat / double(a.count), a.lon / double(a.count)};
            stats.push_back({code, a.count, centroid});
        }
        GroupingTrace trace;
        grouping = compute_grouping(stats, cfg.num_classes, cfg.min_images, cfg.workers, &trace);
        if (f.grouping_out.empty()) throw Error("group needs --grouping-out, --grouping or paths.grouping");
        std::ostringstream text;
        write_grouping(text, grouping);
        write_text(f.grouping_out, text.str());
        if (!f.trace_out.empty()) {
            json doc{{"steps", json::array()}, {"classes_below_min", trace.classes_below_min}};
            for (const auto& s : trace.steps)
                doc["steps"].push_back({{"merged", s.merged},
                                        {"into", s.into},
                                        {"distance_km", s.distance_km},
                                        {"min_count_before", s.min_count_before},
                                        {"min_count_after", s.min_count_after}});
            write_json(f.trace_out, doc);
        }
        log() << "countries: " << stats.size() << "\nclasses: " << grouping.num_classes << "\n";
        for (int c : trace.classes_below_min)
            log() << "warning: class " << c << " has fewer than " << cfg.min_images << " images\n";
    }

    std::size_t labelled = 0;
    for (auto& r : manifest.records) {
        if (r.status != Status::kept || !r.country_code) {
            r.class_id.reset();
            continue;
        }
        r.class_id = map_country_to_class(*r.country_code, grouping);
        ++labelled;
    }
    manifest.set_header("classes", std::to_string(grouping.num_classes));
    if (!grouping.version.empty()) manifest.set_header("grouping_version", grouping.version);
    save_manifest(f.out, manifest);
    log() << "labelled: " << labelled << "\n";
    return kExitOk;
}

int cmd_split(const Flags& f, const PipelineConfig& cfg) {
    refuse_in_place(f.in, f.out);
    auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);

    std::vector<std::size_t> idx;
    std::vector<ImageRecord> subset;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        auto& r = manifest.records[i];
        r.split.reset();
        if (r.status == Status::kept && r.country_code) {
            idx.push_back(i);
            subset.push_back(r);
        }
    }
    split_dataset(subset, cfg.split, cfg.workers);
    std::map<std::string, std::size_t> counts;
    for (std::size_t j = 0; j < idx.size(); ++j) {
        manifest.records[idx[j]].split = subset[j].split;
        ++counts[std::string(to_string(*subset[j].split))];
    }
    const auto& q = cfg.split.ratios;
    manifest.set_header("split", "per country; test=ceil(" + std::to_string(q.test) + "/" +
                                     std::to_string(q.denominator()) + "*n), val=ceil(" + std::to_string(q.val) +
                                     "/" + std::to_string(q.denominator()) +
                                     "*n), each capped so train keeps >= 1; train=rest");
    manifest.set_header("split_seed", std::to_string(cfg.split.seed));
    save_manifest(f.out, manifest);
    for (const auto& [name, n] : counts) log() << name << ": " << n << "\n";
    return kExitOk;
}

int cmd_weights(const Flags& f, const PipelineConfig& cfg) {
    const auto manifest = read_manifest(f.in);
    validate_manifest(manifest.records);
    std::optional<Split> only;
    if (f.only_split) {
        only = parse_split(*f.only_split);
        if (!only) throw ValidationError("--split", "unknown split '" + *f.only_split + "'");
    }
    std::map<int, std::uint64_t> counts;
    for (int c = 0; c < cfg.num_classes; ++c) counts[c] = 0;
    for (const auto& r : manifest.records) {
        if (r.status != Status::kept || !r.class_id) continue;
        if (only && r.split != only) continue;
        if (*r.class_id >= cfg.num_classes)
            throw ValidationError("class_id", r.id + ": class " + std::to_string(*r.class_id) + " >= K = " +
                                                  std::to_string(cfg.num_classes));
        ++counts[*r.class_id];
    }
    auto table = class_weights(counts);
    if (f.rescale) table = rescale_mean_one(std::move(table));
    std::ostringstream text;
    write_weight_table(text, table);
    write_text(f.out, text.str());
    log() << "classes: " << table.entries.size() << " weighted, " << table.excluded.size() << " excluded\n";
    return kExitOk;
}

std::pair<std::string, fs::path> parse_prediction_arg(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos) return {fs::path(arg).stem().string(), arg};
    return {arg.substr(0, eq), arg.substr(eq + 1)};
}

int cmd_eval(const Flags& f, const PipelineConfig& cfg) {
    if (f.predictions.empty()) throw Error("eval needs at least one --predictions");
    EvalReport report;
    report.ks = f.ks;
    std::optional<CountryPolygonSet> boundaries;
    std::optional<ClassGrouping> grouping;
    for (const auto& arg : f.predictions) {
        const auto [set, path] = parse_prediction_arg(arg);
        if (!fs::exists(path)) throw Error("prediction file not found: " + path.string());
        const auto file = read_prediction_file(path);
        for (const auto& w : file.warnings) log() << "warning: " << path.string() << ": " << w << "\n";
        if (file.layout == PredictionLayout::gps && !boundaries) {
            boundaries = load_boundaries(require_path(cfg.paths.boundaries, "paths.boundaries"));
            grouping = load_grouping(require_path(cfg.paths.grouping, "paths.grouping"));
        }
        add_rows(report, set, file, boundaries ? &*boundaries : nullptr, grouping ? &*grouping : nullptr,
                 cfg.fallback_km);
        log() << "predictions: " << set << " <- " << path.string() << " (" << file.records.size() + file.gps.size()
              << " images)\n";
    }
    if (!f.json_out.empty()) write_json(f.json_out, report.to_json());
    const auto table = report.table();
    if (!f.table_out.empty()) write_text(f.table_out, table);
    log() << table;
    return kExitOk;
}

int cmd_report(const Flags& f, const PipelineConfig&) {
    if (f.eval_reports.empty() && f.manifests.empty()) throw Error("report needs --eval or --manifest");
    if (!f.eval_reports.empty()) {
        EvalReport merged;
        for (std::size_t i = 0; i < f.eval_reports.size(); ++i) {
            auto part = EvalReport::from_json(json::parse(read_file(f.eval_reports[i])));
            if (i == 0) merged.ks = part.ks;
            else if (part.ks != merged.ks) throw Error(f.eval_reports[i].string() + ": different k values");
            for (auto& r : part.rows) merged.rows.push_back(std::move(r));
        }
        const auto table = merged.table();
        if (!f.table_out.empty()) write_text(f.table_out, table);
        log() << table;
    }
    if (!f.manifests.empty()) {
        ManifestStats total;
        json per_file = json::object();
        for (const auto& path : f.manifests) {
            const auto m = read_manifest(path);
            const auto s = validate_manifest(m.records);
            per_file[path.string()] = s.to_json();
            total.merge(s);
        }
        json doc{{"total", total.to_json()}, {"files", per_file}};
        if (!f.stats_out.empty()) write_json(f.stats_out, doc);
        log() << "records: " << total.total << "\n";
    }
    return kExitOk;
}

int cmd_validate(const Flags& f, const PipelineConfig& cfg) {
    std::size_t failures = 0, warnings = 0;
    auto check = [&](const std::string& what, auto&& fn) {
        try {
            const std::string detail = fn();
            log() << "ok: " << what << (detail.empty() ? "" : " (" + detail + ")") << "\n";
        } catch (const std::exception& e) {
            ++failures;
            log() << "FAIL: " << what << ": " << e.what() << "\n";
        }
    };
    auto warn = [&](const std::string& where, const std::string& w) {
        ++warnings;
        log() << "warning: " << where << ": " << w << "\n";
    };

    std::optional<SceneTaxonomy> taxonomy;
    std::optional<ClassGrouping> grouping;
    std::optional<CountryPolygonSet> boundaries;

    if (cfg.paths.taxonomy)
        check("taxonomy " + cfg.paths.taxonomy->string(), [&] {
            taxonomy = load_taxonomy(cfg);
            return std::to_string(taxonomy->size()) + " categories, " + std::to_string(taxonomy->blacklist().size()) +
                   " blacklisted";
        });
    if (cfg.paths.boundaries)
        check("boundaries " + cfg.paths.boundaries->string(), [&] {
            boundaries = load_boundaries(*cfg.paths.boundaries);
            return std::to_string(boundaries->countries().size()) + " countries";
        });
    if (cfg.paths.grouping)
        check("grouping " + cfg.paths.grouping->string(), [&] {
            std::vector<std::string> required;
            if (boundaries) required = boundaries->codes();
            grouping = load_grouping(*cfg.paths.grouping, required);
            return "K = " + std::to_string(grouping->num_classes);
        });
    if (cfg.paths.cities)
        check("cities " + cfg.paths.cities->string(), [&] {
            return std::to_string(load_city_table(*cfg.paths.cities, cfg.min_population).size()) + " cities";
        });
    if (cfg.paths.keywords)
        check("keywords " + cfg.paths.keywords->string(),
              [&] { return std::to_string(load_keywords(*cfg.paths.keywords).size()) + " keywords"; });

    for (const auto& path : f.manifests)
        check("manifest " + path.string(), [&] {
            const auto m = read_manifest(path);
            const auto s = validate_manifest(m.records);
            for (const auto& r : m.records) {
                if (grouping && r.country_code && r.class_id &&
                    map_country_to_class(*r.country_code, *grouping) != *r.class_id)
                    throw ValidationError("class_id", r.id + ": does not match the grouping");
                if (!r.extra.empty()) warn(path.string(), r.id + ": unknown keys");
            }
            return std::to_string(s.total) + " records";
        });
    for (const auto& path : f.evidence)
        check("evidence " + path.string(), [&] {
            EvidenceStore store;
            const auto res = store.read(path);
            for (const auto& w : res.warnings) warn(path.string(), w);
            if (taxonomy) {
                std::ifstream in = open_input(path);
                std::string line;
                std::size_t n = 0;
                while (std::getline(in, line)) {
                    ++n;
                    if (trim(line).empty()) continue;
                    const auto row = json::parse(line);
                    if (!row.contains("scene_top5")) continue;
                    for (const auto& p : row["scene_top5"]) {
                        const int cat = p.at(0).get<int>();
                        if (!taxonomy->find(cat))
                            throw ParseError("unknown scene category " + std::to_string(cat), n);
                    }
                }
            }
            return std::to_string(res.rows) + " rows";
        });
    for (const auto& arg : f.predictions) {
        const auto [set, path] = parse_prediction_arg(arg);
        check("predictions " + path.string(), [&] {
            const auto file = read_prediction_file(path);
            for (const auto& w : file.warnings) warn(path.string(), w);
            if (grouping && file.layout != PredictionLayout::gps && file.num_classes != grouping->num_classes)
                throw ValidationError("num_classes", std::to_string(file.num_classes) + " != grouping K " +
                                                         std::to_string(grouping->num_classes));
            return std::to_string(file.records.size() + file.gps.size()) + " images";
        });
    }
    log() << "failures: " << failures << "\nwarnings: " << warnings << "\n";
    if (failures) return kExitData;
    return f.strict && warnings ? kExitData : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    Flags f;
    CLI::App app{"Curation pipeline for geo-tagged image datasets.", "geocurate"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Help for every command");
    app.add_option("-c,--config", f.config, "YAML pipeline config")->check(CLI::ExistingFile);
    app.add_option("-j,--workers", f.workers, "Worker threads (default: available parallelism)");

    auto in_out = [&](CLI::App* s) {
        s->add_option("-i,--in", f.in, "Input manifest")->required()->check(CLI::ExistingFile);
        s->add_option("-o,--out", f.out, "Output manifest")->required();
    };

    auto* gen = app.add_subcommand("gen-queries", "Keyword queries and city bounding boxes");
    gen->add_option("--cities", f.cities, "City table (TSV)");
    gen->add_option("--keywords", f.keywords, "Keyword list");
    gen->add_option("--min-population", f.min_population, "Smallest city population kept");
    gen->add_option("--half-width-km", f.half_width_km, "Bounding box half-width");
    gen->add_option("-o,--out", f.out, "Query list output");
    gen->add_option("--bboxes-out", f.bboxes_out, "Per-city bounding boxes (JSON lines)");
    gen->add_flag("--count-only", f.count_only, "Only count raw queries");
    gen->add_flag("--no-dedup", f.no_dedup, "Keep duplicate query strings");

    auto* assign = app.add_subcommand("assign-country", "Reverse-geocode records to country codes");
    in_out(assign);
    assign->add_option("--boundaries", f.boundaries, "Country boundaries (GeoJSON)");
    assign->add_option("--fallback-km", f.fallback_km, "Nearest-centroid fallback radius");

    auto* filter = app.add_subcommand("filter", "Run the date, grey, scene and face filters");
    in_out(filter);
    filter->add_option("-e,--evidence", f.evidence, "Evidence file (JSON lines), repeatable");
    filter->add_option("--images", f.images, "Image directory for local grey checks");
    filter->add_option("--taxonomy", f.taxonomy, "Scene taxonomy (TSV)");
    filter->add_option("--blacklist", f.blacklist, "Blacklisted scene categories");
    filter->add_option("--urban-threshold", f.urban, "Reject when urban probability <= this");
    filter->add_option("--blacklist-threshold", f.blacklist_thr, "Blacklisted top-1 probability cut");
    filter->add_option("--face-threshold", f.face, "Reject when face area ratio > this");
    filter->add_option("--cutoff-year", f.cutoff_year, "Reject captures before this year");
    filter->add_option("--report", f.report_out, "Rejection histogram (JSON)");
    filter->add_option("--queue", f.queue_out, "Ids still needing evidence");

    auto* norm = app.add_subcommand("normalize", "Resize and re-encode images");
    in_out(norm);
    norm->add_option("--images", f.images, "Source image directory");
    norm->add_option("--out-images", f.out_images, "Output image directory")->required();
    norm->add_option("--crop-plans", f.crop_plans, "Five-crop plans (JSON lines)");
    norm->add_option("--min-dimension", f.min_dimension, "Smaller side limit")->check(CLI::Range(1, 100000));
    norm->add_option("--quality", f.quality, "JPEG quality")->check(CLI::Range(1, 100));

    auto* group = app.add_subcommand("group", "Build or apply the country-to-class grouping");
    in_out(group);
    group->add_option("--boundaries", f.boundaries, "Country boundaries (GeoJSON), for centroids");
    group->add_option("--grouping", f.grouping, "Apply this grouping file instead of computing one");
    group->add_option("-K,--classes", f.classes, "Number of classes");
    group->add_option("--min-images", f.min_images, "Flag classes below this size");
    group->add_option("--grouping-out", f.grouping_out, "Computed grouping file");
    group->add_option("--trace-out", f.trace_out, "Merge trace (JSON)");

    auto* split = app.add_subcommand("split", "Per-country train/val/test split");
    in_out(split);
    split->add_option("--ratios", f.ratios, "train,val,test as decimals or parts (default 0.96,0.02,0.02)");
    split->add_option("--seed", f.seed, "Shuffle seed");

    auto* weights = app.add_subcommand("weights", "Per-class loss weights 1/sqrt(n)");
    weights->add_option("-i,--in", f.in, "Labelled manifest")->required()->check(CLI::ExistingFile);
    weights->add_option("-o,--out", f.out, "Weight table")->required();
    weights->add_option("-K,--classes", f.classes, "Number of classes");
    weights->add_option("--split", f.only_split, "Count only this split");
    weights->add_flag("--rescale", f.rescale, "Scale weights to mean one");

    auto* eval = app.add_subcommand("eval", "Top-k and balanced accuracy from prediction files");
    eval->add_option("-p,--predictions", f.predictions, "[set=]path, repeatable")->required();
    eval->add_option("--boundaries", f.boundaries, "Boundaries for GPS predictions");
    eval->add_option("--grouping", f.grouping, "Grouping for GPS predictions");
    eval->add_option("--fallback-km", f.fallback_km, "Nearest-centroid fallback radius");
    eval->add_option("-k,--ks", f.ks, "k values")->delimiter(',');
    eval->add_option("--json-out", f.json_out, "Report (JSON)");
    eval->add_option("--table-out", f.table_out, "Report table (text)");

    auto* report = app.add_subcommand("report", "Render eval reports and manifest statistics");
    report->add_option("--eval", f.eval_reports, "Eval report (JSON), repeatable")->check(CLI::ExistingFile);
    report->add_option("-m,--manifest", f.manifests, "Manifest, repeatable")->check(CLI::ExistingFile);
    report->add_option("--table-out", f.table_out, "Combined table (text)");
    report->add_option("--stats-out", f.stats_out, "Manifest statistics (JSON)");

    auto* validate = app.add_subcommand("validate", "Check config, manifests, evidence and prediction files");
    validate->add_option("-m,--manifest", f.manifests, "Manifest, repeatable");
    validate->add_option("-e,--evidence", f.evidence, "Evidence file, repeatable");
    validate->add_option("-p,--predictions", f.predictions, "Prediction file, repeatable");
    validate->add_option("--boundaries", f.boundaries, "Country boundaries");
    validate->add_option("--grouping", f.grouping, "Grouping file");
    validate->add_option("--taxonomy", f.taxonomy, "Scene taxonomy");
    validate->add_option("--blacklist", f.blacklist, "Scene blacklist");
    validate->add_flag("--strict", f.strict, "Treat warnings as failures");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e, std::cout, std::cerr);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        const auto cfg = resolve_config(f);
        if (gen->parsed()) return cmd_gen_queries(f, cfg);
        if (assign->parsed()) return cmd_assign_country(f, cfg);
        if (filter->parsed()) return cmd_filter(f, cfg);
        if (norm->parsed()) return cmd_normalize(f, cfg);
        if (group->parsed()) return cmd_group(f, cfg);
        if (split->parsed()) return cmd_split(f, cfg);
        if (weights->parsed()) return cmd_weights(f, cfg);
        if (eval->parsed()) return cmd_eval(f, cfg);
        if (report->parsed()) return cmd_report(f, cfg);
        if (validate->parsed()) return cmd_validate(f, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv) {
    return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace geocurate::cli
