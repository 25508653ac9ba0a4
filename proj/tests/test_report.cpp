#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"
#include "ierisk/report.hpp"
#include "reference_fixture.hpp"

using namespace ierisk;

namespace {

HfeReport sample_hfe() {
    HfeReport h;
    h.candidates.push_back({"P_122", 0.25, {ErrorKind::outcome}, false, 0.4, {Provenance::error_path}});
    h.candidates.push_back({"P_321", 0.2, {ErrorKind::execution}, true, 0.01, {Provenance::error_path, Provenance::time_path}});
    h.candidates.push_back({"P_411", 0.0, {}, true, 0.02, {Provenance::time_path}});
    h.per_procedure = {{"PROC-100", 1}, {"PROC-300", 1}, {"PROC-400", 1}};
    h.prioritized_procedures = {"PROC-100", "PROC-300", "PROC-400"};
    h.flagged_steps = {{"PROC-100", "S122", "P_122"}, {"PROC-300", "S321", "P_321"}, {"PROC-400", "S411", "P_411"}};
    return h;
}

std::vector<PathAnalysis> sample_analyses(const InterfaceGraph& g) {
    MetricsConfig cfg;
    cfg.normalizer_px = fixture::kTableNormalizerPx;
    std::vector<PathAnalysis> out;
    const std::vector<std::pair<std::string, std::string>> labels{{"P_110", "HSI0"}, {"P_122", "HSI5"}, {"P_321", "HSI1"}};
    for (const auto& [path, label] : labels) {
        const std::vector<Point> traj{{0, 0}, {100, 0}};
        auto m = metric_vector(g, resolve_path(g, path), traj, fixture::similarity(), cfg);
        std::vector<double> probs{0.1, 0.1, 0.1};
        probs[label == "HSI0" ? 0 : (label == "HSI1" ? 1 : 2)] = 0.8;
        out.push_back({path, m, Prediction{label, probs}});
    }
    return out;
}

const std::vector<std::string> kLabels{"HSI0", "HSI1", "HSI5"};

} // namespace

TEST_CASE("default conflict set") {
    const auto set = default_conflict_set();
    CHECK(set.contains("HSI2"));
    CHECK(set.contains("HSI5"));
    CHECK(set.contains("HSI7"));
    CHECK(set.contains("HSI15"));
    CHECK_FALSE(set.contains("HSI0"));
    CHECK_FALSE(set.contains("HSI1"));
    CHECK_FALSE(set.contains("HSI3"));
    CHECK_FALSE(set.contains("HSI4"));
    CHECK_FALSE(set.contains("HSI8"));
    CHECK(set.size() == 10);
}

TEST_CASE("quadrant classification is total") {
    const auto set = default_conflict_set();
    CHECK(conflict_quadrant("HSI5", true, set) == ConflictQuadrant::conflict_and_error);
    CHECK(conflict_quadrant("HSI5", false, set) == ConflictQuadrant::conflict_only);
    CHECK(conflict_quadrant("HSI1", true, set) == ConflictQuadrant::error_only);
    CHECK(conflict_quadrant("HSI0", false, set) == ConflictQuadrant::neither);
    for (const auto& row : pif_weight_table()) {
        for (bool e : {false, true}) {
            const auto q = conflict_quadrant(row.label, e, set);
            CHECK(parse_conflict_quadrant(to_string(q)) == q);
        }
    }
    CHECK_THROWS_AS(conflict_quadrant("HSI77", true, set), InvalidArgument);
    CHECK_THROWS_AS(conflict_quadrant("HSI1", true, {"bogus"}), InvalidArgument);
    CHECK_FALSE(parse_conflict_quadrant("both").has_value());
}

TEST_CASE("report assembly") {
    const auto g = fixture::graph();
    const auto analyses = sample_analyses(g);
    ToolConfig cfg;
    const auto r = assemble_report(g, sample_hfe(), analyses, kLabels, cfg, "2026-01-01T00:00:00Z");
    CHECK(r.schema_version == kReportSchemaVersion);
    CHECK(r.tool_version == kToolVersion);
    CHECK(r.config_fingerprint == config_fingerprint(cfg));
    CHECK(r.graph == summarize_graph(g));
    REQUIRE(r.paths.size() == 4);
    CHECK(r.paths[0].path_id == "P_110");
    CHECK(r.paths[0].quadrant == ConflictQuadrant::neither);
    CHECK(r.paths[1].path_id == "P_122");
    CHECK(r.paths[1].quadrant == ConflictQuadrant::conflict_and_error);
    CHECK(r.paths[1].outcome_error);
    CHECK(r.paths[2].quadrant == ConflictQuadrant::error_only);
    CHECK(r.paths[3].path_id == "P_411");
    CHECK_FALSE(r.paths[3].quadrant.has_value());
    CHECK_FALSE(r.paths[3].error_observed);
    CHECK(r.conflicts.outcome_error_paths == 1);
    CHECK(r.conflicts.outcome_conflict_and_error == 1);
    CHECK(r.conflicts.conflict_and_error_paths == std::vector<std::string>{"P_122"});
    CHECK(r.conflicts.counts.at(ConflictQuadrant::error_only) == 1);
    CHECK(r.conflict_set.front() == "HSI2");
    CHECK(r.conflict_set.back() == "HSI15");
}

TEST_CASE("report assembly rejects inconsistent input") {
    const auto g = fixture::graph();
    auto analyses = sample_analyses(g);
    ToolConfig cfg;
    auto hfe = sample_hfe();
    hfe.candidates.push_back({"P_999", 0.5, {}, false, 0.0, {Provenance::error_path}});
    CHECK_THROWS_AS(assemble_report(g, hfe, analyses, kLabels, cfg, ""), GraphError);
    const std::vector<std::string> two{"HSI0", "HSI1"};
    CHECK_THROWS_AS(assemble_report(g, sample_hfe(), analyses, two, cfg, ""), InvalidArgument);
}

TEST_CASE("empty analysis") {
    const auto g = fixture::graph();
    const auto r = assemble_report(g, {}, {}, {}, ToolConfig{}, "t");
    CHECK(r.paths.empty());
    CHECK(r.conflicts.counts.empty());
    CHECK(report_from_json(report_to_json(r)) == r);
}

TEST_CASE("JSON round-trip and determinism modulo the timestamp") {
    const auto g = fixture::graph();
    const auto analyses = sample_analyses(g);
    ToolConfig cfg;
    cfg.conflict_set = {"HSI1", "HSI5"};
    const auto a = assemble_report(g, sample_hfe(), analyses, kLabels, cfg, "2026-01-01T00:00:00Z");
    const auto b = assemble_report(g, sample_hfe(), analyses, kLabels, cfg, "2026-02-02T00:00:00Z");
    auto ja = report_to_json(a);
    auto jb = report_to_json(b);
    CHECK(ja != jb);
    ja.erase("generated_at");
    jb.erase("generated_at");
    CHECK(ja.dump() == jb.dump());

    const auto again = report_from_json(report_to_json(a));
    CHECK(again == a);
    CHECK(report_to_json(again).dump() == report_to_json(a).dump());
    CHECK(again.paths[2].quadrant == ConflictQuadrant::conflict_and_error);

    auto bad = report_to_json(a);
    bad["schema_version"] = 99;
    CHECK_THROWS(report_from_json(bad));
}

TEST_CASE("HFE JSON round-trip") {
    const auto h = sample_hfe();
    CHECK(hfe_from_json(hfe_to_json(h)) == h);
}

TEST_CASE("timestamps") {
    const auto t = utc_timestamp();
    CHECK(t.size() == 20);
    CHECK(t[10] == 'T');
    CHECK(t.back() == 'Z');
}

TEST_CASE("CSV outputs") {
    const auto g = fixture::graph();
    std::ostringstream cand;
    write_candidates_csv(cand, sample_hfe());
    CHECK(cand.str().rfind("path_id,error_prob,error_kinds,time_flag,tail_prob,provenance\n", 0) == 0);
    CHECK(cand.str().find("P_321,") != std::string::npos);

    const auto r = assemble_report(g, sample_hfe(), sample_analyses(g), kLabels, ToolConfig{}, "t");
    std::ostringstream table;
    write_path_table_csv(table, r);
    CHECK(table.str().rfind("path_id,pif_label,quadrant,vd,sid,is\n", 0) == 0);
    CHECK(table.str().find("P_122,HSI5,conflict_and_error,") != std::string::npos);

    std::ostringstream hist;
    write_duration_histograms_csv(hist, {{"P_1", {0.5, 1.5, 2.5}}, {"P_2", {3.9}}}, {{"P_1", "A"}, {"P_2", "A"}});
    CHECK(hist.str() == "category,bin_lo_s,bin_hi_s,count\nA,0,2,2\nA,2,4,2\n");
}
