#include <fstream>
#include <iostream>
#include <sstream>

#include <gtest/gtest.h>

#include "geocurate/cli.hpp"
#include "geocurate/config.hpp"
#include "geocurate/io.hpp"
#include "test_support.hpp"

using namespace geocurate;
namespace fs = std::filesystem;

namespace {

struct Captured {
    int code;
    std::string err;
};

Captured run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "geocurate");
    std::ostringstream err;
    auto* old = std::cerr.rdbuf(err.rdbuf());
    std::ostringstream out;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    const int code = cli::run(args);
    std::cerr.rdbuf(old);
    std::cout.rdbuf(old_out);
    return {code, err.str()};
}

std::string fixture(const char* name) { return (support::fixtures_dir() / name).string(); }

}  // namespace

TEST(Config, FixtureLoadsAndResolvesPaths) {
    auto cfg = load_config(support::fixtures_dir() / "pipeline.yaml");
    EXPECT_EQ(cfg.num_classes, 7);
    EXPECT_EQ(cfg.split.seed, 7u);
    EXPECT_EQ(cfg.split.ratios.test * 100 / cfg.split.ratios.denominator(), 2u);
    ASSERT_TRUE(cfg.paths.boundaries);
    EXPECT_TRUE(fs::exists(*cfg.paths.boundaries));
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ErrorsNameTheField) {
    auto field_of = [](const std::string& yaml) -> std::string {
        try {
            parse_config(yaml).validate();
        } catch (const ConfigError& e) {
            return e.field();
        }
        return "";
    };
    EXPECT_EQ(field_of("thresholds:\n  urban: 1.5\n"), "thresholds.urban");
    EXPECT_EQ(field_of("thresholds:\n  face: -0.1\n"), "thresholds.face");
    EXPECT_EQ(field_of("thresholds:\n  colour: 3\n"), "thresholds.colour");
    EXPECT_EQ(field_of("paths:\n  boundaries: /no/such/file.geojson\n"), "paths.boundaries");
    EXPECT_EQ(field_of("split:\n  ratios: \"0.5,0.5,0.5\"\n"), "split.ratios");
    EXPECT_EQ(field_of("fusion: median\n"), "fusion");
    EXPECT_EQ(field_of("classes: many\n"), "classes");
    EXPECT_EQ(field_of("classes: 61\n"), "");
}

TEST(Cli, UnknownCommandIsUsageError) {
    EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"split", "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST(Cli, ConfigErrorExitsOneWithField) {
    auto dir = support::temp_dir("cfg");
    std::ofstream(dir / "bad.yaml") << "thresholds:\n  face: 3\n";
    auto r = run_cli({"-c", (dir / "bad.yaml").string(), "validate"});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_NE(r.err.find("thresholds.face"), std::string::npos) << r.err;
    fs::remove_all(dir);
}

TEST(Cli, ValidateShippedFixtures) {
    auto r = run_cli({"-c", fixture("pipeline.yaml"), "validate", "--strict", "-m", fixture("manifest.jsonl"), "-e",
                      fixture("evidence_scene.jsonl"), "-e", fixture("evidence_faces.jsonl"), "-p",
                      fixture("predictions_five_crop.jsonl"), "-p", fixture("predictions_resize224.jsonl"), "-p",
                      fixture("predictions_gps.jsonl")});
    EXPECT_EQ(r.code, cli::kExitOk) << r.err;
}

TEST(Cli, MissingEvidenceFileNamesThePath) {
    auto dir = support::temp_dir("ev");
    auto r = run_cli({"-c", fixture("pipeline.yaml"), "filter", "-i", fixture("manifest.jsonl"), "-o",
                      (dir / "out.jsonl").string(), "-e", "/nonexistent/scene.jsonl"});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_NE(r.err.find("/nonexistent/scene.jsonl"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "out.jsonl"));
    fs::remove_all(dir);
}

TEST(Cli, RefusesToOverwriteInput) {
    auto dir = support::temp_dir("inplace");
    fs::copy_file(fixture("manifest.jsonl"), dir / "m.jsonl");
    const auto before = read_file(dir / "m.jsonl");
    auto r = run_cli({"-c", fixture("pipeline.yaml"), "assign-country", "-i", (dir / "m.jsonl").string(), "-o",
                      (dir / "m.jsonl").string()});
    EXPECT_EQ(r.code, cli::kExitData);
    EXPECT_EQ(read_file(dir / "m.jsonl"), before);
    fs::remove_all(dir);
}

TEST(Cli, FlagsOverrideConfig) {
    auto dir = support::temp_dir("override");
    auto base = run_cli({"-c", fixture("pipeline.yaml"), "assign-country", "-i", fixture("manifest.jsonl"), "-o",
                         (dir / "a.jsonl").string()});
    ASSERT_EQ(base.code, 0) << base.err;
    auto strict = run_cli({"-c", fixture("pipeline.yaml"), "filter", "-i", (dir / "a.jsonl").string(), "-o",
                           (dir / "b.jsonl").string(), "-e", fixture("evidence_scene.jsonl"), "-e",
                           fixture("evidence_faces.jsonl"), "--face-threshold", "0", "--report",
                           (dir / "r.json").string()});
    ASSERT_EQ(strict.code, 0) << strict.err;
    auto report = nlohmann::json::parse(read_file(dir / "r.json"));
    auto loose = run_cli({"-c", fixture("pipeline.yaml"), "filter", "-i", (dir / "a.jsonl").string(), "-o",
                          (dir / "c.jsonl").string(), "-e", fixture("evidence_scene.jsonl"), "-e",
                          fixture("evidence_faces.jsonl"), "--report", (dir / "r2.json").string()});
    ASSERT_EQ(loose.code, 0);
    auto report2 = nlohmann::json::parse(read_file(dir / "r2.json"));
    EXPECT_GT(report["rejected"]["face_area"].get<int>(), report2["rejected"]["face_area"].get<int>());
    fs::remove_all(dir);
}

TEST(Cli, GroupFallsBackToConfiguredGrouping) {
    auto dir = support::temp_dir("group");
    ASSERT_EQ(run_cli({"-c", fixture("pipeline.yaml"), "assign-country", "-i", fixture("manifest.jsonl"), "-o",
                       (dir / "a.jsonl").string()})
                  .code,
              0);
    auto r = run_cli({"-c", fixture("pipeline.yaml"), "group", "-i", (dir / "a.jsonl").string(), "-o",
                      (dir / "g.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("grouping_k7.tsv"), std::string::npos) << r.err;
    fs::remove_all(dir);
}
