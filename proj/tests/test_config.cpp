#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ierisk/config.hpp"
#include "ierisk/error.hpp"

using namespace ierisk;
using nlohmann::json;

TEST_CASE("empty config gives the defaults") {
    const auto c = load_config(json::object());
    CHECK(c.embed.provider == "local");
    CHECK(c.time.tau == 1.0);
    CHECK(c.time.sigma == 0.28);
    CHECK(c.errors.alpha == 1.0);
    CHECK(c.errors.min_error_rate == 0.0);
    CHECK(c.metrics.theta == 0.8);
    CHECK_FALSE(c.metrics.normalizer_px.has_value());
    CHECK(c.pif_hyper.epochs == 200);
    CHECK(c.pif_hyper.learning_rate == 1e-3);
    CHECK(c.pif_hyper.dropout == 0.3);
    CHECK(c.cv_folds == 5);
    CHECK(c.conflict_set.empty());
}

TEST_CASE("sections override defaults") {
    const auto c = load_config(json::parse(R"({
        "paths": {"graph": "g.json"},
        "embed": {"provider": "remote", "endpoint": "http://localhost:9/e", "cache_dir": "/tmp/x"},
        "riskpath": {"tau": 1.5, "min_error_rate": 0.1},
        "metrics": {"theta": 0.7, "normalizer_px": 2654.05, "pairwise_sid": true},
        "pif": {"seed": 7, "folds": 4, "hyper": {"epochs": 50, "dropout": 0.0}},
        "report": {"conflict_set": ["HSI5"]}
    })"));
    CHECK(c.paths.at("graph") == "g.json");
    CHECK(c.embed.provider == "remote");
    CHECK(c.embed.cache_dir == "/tmp/x");
    CHECK(c.time.tau == 1.5);
    CHECK(c.errors.min_error_rate == 0.1);
    CHECK(c.metrics.normalizer_px == 2654.05);
    CHECK(c.metrics.pairwise_sid);
    CHECK(c.pif_seed == 7);
    CHECK(c.cv_folds == 4);
    CHECK(c.pif_hyper.epochs == 50);
    CHECK(c.pif_hyper.learning_rate == 1e-3);
    CHECK(c.conflict_set == std::set<std::string>{"HSI5"});

    const auto again = load_config(config_to_json(c));
    CHECK(config_to_json(again) == config_to_json(c));
    CHECK(config_fingerprint(again) == config_fingerprint(c));
}

TEST_CASE("invalid configs") {
    CHECK_THROWS_AS(load_config(json::array()), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"embed": {"provider": "cloud"}})")), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"riskpath": {"tau": 0}})")), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"metrics": {"theta": 0}})")), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"metrics": {"normalizer_px": -1}})")), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"pif": {"hyper": {"dropout": 1.0}}})")), InvalidArgument);
    CHECK_THROWS_AS(load_config(json::parse(R"({"pif": {"seed": "x"}})")), InvalidArgument);
}

TEST_CASE("fingerprint is stable and sensitive") {
    ToolConfig a;
    ToolConfig b;
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    CHECK(config_fingerprint(a).size() == 64);
    b.time.tau = 1.01;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
}

TEST_CASE("config files") {
    const auto file = std::filesystem::temp_directory_path() / "ierisk_config_test.json";
    {
        std::ofstream out(file);
        out << R"({"pif": {"seed": 3}})";
    }
    CHECK(load_config_file(file).pif_seed == 3);
    {
        std::ofstream out(file);
        out << "{";
    }
    CHECK_THROWS_AS(load_config_file(file), ParseError);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(load_config_file(file), Error);
}
