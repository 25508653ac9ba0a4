#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"
#include "ierisk/riskpath.hpp"
#include "ierisk/simgen.hpp"
#include "reference_fixture.hpp"

using namespace ierisk;

namespace {

Procedure repeated(const std::string& path, std::size_t steps) {
    Procedure p{"PROC", {}};
    for (std::size_t i = 0; i < steps; ++i) p.steps.push_back({std::to_string(i + 1), "Check", path});
    return p;
}

std::vector<double> durations(const InterfaceGraph& g, const std::vector<SessionLog>& sessions) {
    std::vector<double> out;
    for (const auto& s : sessions) {
        for (const auto& st : align_events(g, s).steps) out.push_back(st.duration_s);
    }
    return out;
}

std::size_t annotations(const std::vector<SessionLog>& sessions, ErrorKind kind) {
    std::size_t n = 0;
    for (const auto& s : sessions)
        for (const auto& e : s.events) n += e.kind == EventKind::error_annotation && e.error_kind == kind;
    return n;
}

} // namespace

TEST_CASE("session ids and structure") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_501", 3)};
    plan.default_path = PathPlan{2.0, 0.28, 0.0, 0.0};
    plan.participants = 2;
    plan.sessions_per_participant = 3;
    const auto sessions = generate_sessions(g, plan);
    REQUIRE(sessions.size() == 6);
    CHECK(sessions[0].session_id == "p01-s001");
    CHECK(sessions[5].session_id == "p02-s003");
    CHECK(sessions[5].participant_id == "p02");
    for (const auto& s : sessions) {
        std::size_t moves = 0;
        std::int64_t last = -1;
        for (const auto& e : s.events) {
            CHECK(e.t_ms >= last);
            last = e.t_ms;
            if (e.kind == EventKind::move) ++moves;
        }
        CHECK(moves >= 9);
        CHECK(moves <= 24);
        CHECK(s.events.front().step_id == "PROC/1");
    }
    CHECK(plan_step_targets(plan).at("PROC/2") == "P_501");
}

TEST_CASE("clicks land on the planned element") {
    const auto g = fixture::graph();
    ScenarioPlan plan;
    plan.procedures = fixture::procedures();
    plan.default_path = PathPlan{};
    plan.seed = 99;
    const auto log = generate_sessions(g, plan).front();
    const auto trace = align_events(g, log);
    REQUIRE(trace.steps.size() == fixture::metric_table().size());
    for (const auto& st : trace.steps) {
        const auto slash = st.step_id.find('/');
        CHECK(st.path_id == "P_" + st.step_id.substr(slash + 2));
    }
}

TEST_CASE("error probabilities at the extremes") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_601", 20)};
    plan.participants = 5;
    plan.default_path = PathPlan{2.0, 0.28, 0.0, 0.0};
    auto sessions = generate_sessions(g, plan);
    CHECK(annotations(sessions, ErrorKind::execution) == 0);
    CHECK(annotations(sessions, ErrorKind::outcome) == 0);

    plan.default_path = PathPlan{2.0, 0.28, 1.0, 1.0};
    sessions = generate_sessions(g, plan);
    CHECK(annotations(sessions, ErrorKind::execution) == 100);
    CHECK(annotations(sessions, ErrorKind::outcome) == 100);
    for (const auto& t : {align_events(g, sessions[0])})
        for (const auto& st : t.steps) CHECK(st.errors.size() == 2);
}

TEST_CASE("duration distribution matches the plan") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_505", 100)};
    plan.default_path = PathPlan{2.0, 0.28, 0.0, 0.0};
    plan.participants = 10;
    plan.sessions_per_participant = 10;
    plan.seed = 2024;
    auto d = durations(g, generate_sessions(g, plan));
    REQUIRE(d.size() == 10000);
    CHECK(lower_median(d) >= 1.9);
    CHECK(lower_median(d) <= 2.1);

    d.resize(1000);
    double mean = 0.0;
    for (double v : d) mean += std::log(v);
    mean /= 1000.0;
    double ss = 0.0;
    for (double v : d) ss += (std::log(v) - mean) * (std::log(v) - mean);
    const double sd = std::sqrt(ss / 999.0);
    CHECK(sd >= 0.28 * 0.85);
    CHECK(sd <= 0.28 * 1.15);
}

TEST_CASE("generation is byte-for-byte deterministic") {
    const auto g = fixture::graph();
    ScenarioPlan plan;
    plan.procedures = fixture::procedures();
    plan.default_path = PathPlan{5.0, 0.28, 0.1, 0.05};
    plan.participants = 2;
    plan.sessions_per_participant = 2;
    plan.seed = 17;
    const auto a = generate_sessions(g, plan);
    const auto b = generate_sessions(g, plan);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(serialize_session_log(a[i]) == serialize_session_log(b[i]));
    CHECK(serialize_session_log(generate_session(g, plan, 1, 1)) == serialize_session_log(a[3]));
    plan.seed = 18;
    CHECK(serialize_session_log(generate_sessions(g, plan)[0]) != serialize_session_log(a[0]));
}

TEST_CASE("zero sigma gives exact durations") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_502", 5)};
    plan.default_path = PathPlan{3.25, 0.0, 0.0, 0.0};
    for (double d : durations(g, generate_sessions(g, plan))) CHECK(d == doctest::Approx(3.25));
}

TEST_CASE("plan validation") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_501", 1)};
    CHECK_THROWS_AS(generate_sessions(g, plan), InvalidArgument);  // no model for the path
    plan.default_path = PathPlan{};
    CHECK_NOTHROW(validate_plan(g, plan));
    plan.paths["P_501"] = PathPlan{2.0, 0.28, 1.5, 0.0};
    CHECK_THROWS_AS(validate_plan(g, plan), InvalidArgument);
    plan.paths.clear();
    plan.procedures[0].steps[0].target_path = "P_999";
    CHECK_THROWS_AS(validate_plan(g, plan), InvalidArgument);
    plan.procedures[0].steps[0].target_path.reset();
    CHECK_THROWS_AS(validate_plan(g, plan), InvalidArgument);
    plan.procedures = {repeated("P_501", 1)};
    plan.participants = 0;
    CHECK_THROWS_AS(validate_plan(g, plan), InvalidArgument);
}

TEST_CASE("plan JSON round-trip and defaults") {
    ScenarioPlan plan;
    plan.procedures = {repeated("P_501", 2)};
    plan.default_path = PathPlan{4.0, 0.3, 0.1, 0.0};
    plan.paths["P_503"] = PathPlan{6.4, 0.28, 0.0, 0.2};
    plan.participants = 3;
    plan.sessions_per_participant = 4;
    plan.seed = 5;
    const auto again = load_plan(plan_to_json(plan));
    CHECK(again.paths == plan.paths);
    CHECK(again.default_path == plan.default_path);
    CHECK(again.participants == 3);
    CHECK(again.seed == 5);
    CHECK(plan_to_json(again) == plan_to_json(plan));

    const auto partial = load_plan(nlohmann::json::parse(R"({
        "procedures": [{"procedure_id": "X", "steps": [{"step_id": "1", "text": "t", "target_path": "P_501"}]}],
        "default_path": {"median_s": 3.0},
        "paths": {"P_502": {"p_outcome": 0.5}}
    })"));
    CHECK(partial.paths.at("P_502").median_s == 3.0);
    CHECK(partial.paths.at("P_502").p_outcome == 0.5);
    CHECK(partial.default_path->sigma == 0.28);
    CHECK_THROWS_AS(load_plan(nlohmann::json::object()), InvalidArgument);
}

TEST_CASE("sessions are written one file each") {
    const auto g = fixture::sim_graph();
    ScenarioPlan plan;
    plan.procedures = {repeated("P_501", 2)};
    plan.default_path = PathPlan{};
    plan.sessions_per_participant = 2;
    const auto sessions = generate_sessions(g, plan);
    const auto dir = std::filesystem::temp_directory_path() / "ierisk_simgen_out";
    std::filesystem::remove_all(dir);
    const auto files = write_sessions(sessions, dir);
    REQUIRE(files.size() == 2);
    CHECK(files[1].filename() == "p01-s002.jsonl");
    CHECK(read_session_log(files[1]) == sessions[1]);
    std::filesystem::remove_all(dir);
}
