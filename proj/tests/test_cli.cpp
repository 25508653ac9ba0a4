#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = IERISK_SOURCE_DIR;
const std::string kCli = IERISK_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = "cd \"" + kRoot.string() + "\" && \"" + kCli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("graph validate exit codes") {
    CHECK(run("graph validate --graph data/example/graph.json") == 0);

    const auto dir = scratch("ierisk_cli_graph");
    fs::create_directories(dir);
    auto doc = nlohmann::json::parse(slurp(kRoot / "data/example/graph.json"));
    doc["elements"][3]["bbox"] = {0, 0, 0, 10};
    std::ofstream(dir / "bad.json") << doc.dump();
    CHECK(run("graph validate --graph " + (dir / "bad.json").string()) == 1);

    std::ofstream(dir / "broken.json") << "{";
    CHECK(run("graph validate --graph " + (dir / "broken.json").string()) == 2);
    CHECK(run("graph validate --graph " + (dir / "missing.json").string()) == 2);
    fs::remove_all(dir);
}

TEST_CASE("usage errors are fatal") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("pif") == 2);
    CHECK(run("--version") == 0);
}

TEST_CASE("simulate, hfe and report pipeline") {
    const auto out = scratch("ierisk_cli_pipeline");
    const std::string base = "--config data/example/config.json --out " + out.string() + " ";
    REQUIRE(run(base + "simulate") == 0);
    const auto first = slurp(out / "sessions" / "p01-s001.jsonl");
    CHECK_FALSE(first.empty());
    REQUIRE(run(base + "simulate") == 0);
    CHECK(slurp(out / "sessions" / "p01-s001.jsonl") == first);
    REQUIRE(run(base + "--seed 8 simulate") == 0);
    CHECK(slurp(out / "sessions" / "p01-s001.jsonl") != first);
    REQUIRE(run(base + "simulate") == 0);

    const std::string sessions = " --sessions " + (out / "sessions").string();
    CHECK(run(base + "ingest" + sessions) == 0);
    CHECK(fs::exists(out / "traces.json"));
    CHECK(run(base + "hfe" + sessions) == 0);
    CHECK(slurp(out / "candidates.csv").find("P_413") != std::string::npos);
    CHECK(run(base + "metrics" + sessions) == 0);
    CHECK(fs::exists(out / "metrics.csv"));

    REQUIRE(run(base + "report" + sessions) == 0);
    auto a = nlohmann::json::parse(slurp(out / "risk_report.json"));
    REQUIRE(run(base + "report" + sessions) == 0);
    auto b = nlohmann::json::parse(slurp(out / "risk_report.json"));
    CHECK(a["schema_version"] == 1);
    a.erase("generated_at");
    b.erase("generated_at");
    CHECK(a.dump() == b.dump());
    CHECK(fs::exists(out / "path_table.csv"));
    CHECK(fs::exists(out / "duration_histograms.csv"));
    fs::remove_all(out);
}

TEST_CASE("pif train, cv and predict") {
    const auto out = scratch("ierisk_cli_pif");
    const std::string base = "--out " + out.string() + " ";
    const std::string data = " --data data/published_interface_metrics.csv";
    REQUIRE(run(base + "pif train" + data) == 0);
    CHECK(fs::exists(out / "pif_model.bin"));
    CHECK(run(base + "pif predict --model " + (out / "pif_model.bin").string() +
              " --features data/untested_procedures.csv") == 0);
    const auto pred = slurp(out / "predictions.csv");
    CHECK(pred.rfind("path_id,label,p_HSI0,p_HSI1,p_HSI5\n", 0) == 0);
    CHECK(pred.find("TP_3,") != std::string::npos);
    CHECK(run(base + "pif cv" + data) == 0);
    CHECK(nlohmann::json::parse(slurp(out / "cv.json"))["fold_accuracies"].size() == 5);
    CHECK(run(base + "pif predict --model " + (out / "nope.bin").string() + " --features data/untested_procedures.csv") == 2);
    fs::remove_all(out);
}
