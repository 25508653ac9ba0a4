#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ierisk/error.hpp"
#include "ierisk/metrics.hpp"
#include "reference_fixture.hpp"

using namespace ierisk;

namespace {

NameSimilarity table_similarity(std::map<std::pair<std::string, std::string>, double> pairs) {
    return [pairs = std::move(pairs)](std::string_view a, std::string_view b) {
        if (a == b) return 1.0;
        auto it = pairs.find({std::string(a), std::string(b)});
        if (it == pairs.end()) it = pairs.find({std::string(b), std::string(a)});
        return it == pairs.end() ? 0.0 : it->second;
    };
}

} // namespace

TEST_CASE("visual density") {
    const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    CHECK(visual_density(ids, "c") == doctest::Approx(0.2));
    const std::vector<std::string> one{"a"};
    CHECK(visual_density(one, "a") == 1.0);
    CHECK_THROWS_AS(visual_density(ids, "z"), InvalidArgument);
}

TEST_CASE("semantic interference density") {
    const auto sim = table_similarity({{{"Excitation Voltage", "Excitation Current"}, 0.9},
                                       {{"Excitation Voltage", "Terminal Voltage"}, 0.8},
                                       {{"Excitation Voltage", "Power Factor"}, 0.1}});
    const std::vector<std::string> others{"Excitation Current", "Terminal Voltage", "Power Factor", "Excitation Voltage"};
    const auto r = semantic_interference_density("Excitation Voltage", others, sim);
    // 0.8 is not strictly above the threshold; the duplicate name is.
    CHECK(r.numerator == 2);
    CHECK(r.denominator == 4);
    CHECK(r.ratio == doctest::Approx(0.5));
    CHECK(r.contributing == std::vector<std::string>{"Excitation Current", "Excitation Voltage"});

    const auto lax = semantic_interference_density("Excitation Voltage", others, sim, 0.5);
    CHECK(lax.numerator == 3);

    const auto none = semantic_interference_density("x", {}, sim);
    CHECK(none.undefined);
    CHECK(none.ratio == 0.0);
    CHECK_THROWS_AS(semantic_interference_density("x", others, sim, 0.0), InvalidArgument);
}

TEST_CASE("pairwise reading") {
    const auto sim = table_similarity({{{"a", "b"}, 0.95}});
    const std::vector<std::string> names{"a", "b", "c", "d"};
    const auto r = semantic_interference_pairwise(names, sim);
    CHECK(r.numerator == 1);
    CHECK(r.denominator == 6);
    const std::vector<std::string> single{"a"};
    CHECK(semantic_interference_pairwise(single, sim).undefined);
}

TEST_CASE("traversal and interaction span") {
    const std::vector<Point> tri{{0, 0}, {3, 4}, {3, 10}};
    CHECK(traversal_length(tri) == doctest::Approx(11.0));
    CHECK(interaction_span(tri, 22.0) == doctest::Approx(0.5));
    const std::vector<Point> still{{5, 5}};
    CHECK(interaction_span(still, 100.0) == 0.0);
    CHECK_THROWS_AS(interaction_span(tri, 0.0), InvalidArgument);
    CHECK_THROWS_AS(interaction_span({}, 10.0), InvalidArgument);
}

TEST_CASE("metric vector reproduces every row of the published table") {
    const auto g = fixture::graph();
    const auto sim = fixture::similarity();
    MetricsConfig cfg;
    cfg.normalizer_px = fixture::kTableNormalizerPx;
    for (const auto& row : fixture::metric_table()) {
        CAPTURE(row.path_id);
        const auto path = resolve_path(g, row.path_id);
        const auto traj = fixture::row_trajectory(g, row);
        const auto m = metric_vector(g, path, traj, sim, cfg);
        CHECK(m.raw.n_elements == row.vd_den);
        CHECK(m.raw.n_high_similarity == row.sid_num);
        CHECK(m.raw.n_comparisons == row.sid_den);
        CHECK(m.vd == doctest::Approx(1.0 / static_cast<double>(row.vd_den)).epsilon(1e-9));
        CHECK(m.sid == doctest::Approx(static_cast<double>(row.sid_num) / static_cast<double>(row.sid_den)).epsilon(1e-9));
        CHECK(m.is_norm == doctest::Approx(row.is_px / fixture::kTableNormalizerPx).epsilon(1e-9));
    }
}

TEST_CASE("normalizer defaults to the layout diagonal") {
    const auto g = fixture::graph();
    const auto path = resolve_path(g, "P_411");
    const std::vector<Point> traj{{0, 0}, {1920, 1080}};
    const auto m = metric_vector(g, path, traj, fixture::similarity());
    CHECK(m.raw.normalizer_px == doctest::Approx(std::hypot(1920.0, 1080.0)));
    CHECK(m.is_norm == doctest::Approx(1.0));
}

TEST_CASE("metrics CSV") {
    const auto g = fixture::graph();
    MetricsConfig cfg;
    cfg.normalizer_px = 1000.0;
    const std::vector<Point> traj{{0, 0}, {300, 400}};
    std::vector<PathMetrics> rows{{"P_411", metric_vector(g, resolve_path(g, "P_411"), traj, fixture::similarity(), cfg)}};
    std::ostringstream out;
    write_metrics_csv(out, rows);
    const auto text = out.str();
    CHECK(text.rfind("path_id,vd_num,vd_den,sid_num,sid_den,is_num_px,is_den_px,vd,sid,is\n", 0) == 0);
    CHECK(text.find("P_411,1,") != std::string::npos);
    CHECK(text.find(",500.00,1000.00,") != std::string::npos);
    CHECK(text.find(",0.5\n") != std::string::npos);
}
