#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "ierisk/graph.hpp"
#include "ierisk/ingest.hpp"
#include "ierisk/pifnet.hpp"
#include "ierisk/similarity.hpp"

namespace fixture {

// One row of the published interface-metric table.
struct MetricRow {
    std::string path_id;
    std::size_t vd_den;
    std::size_t sid_num;
    std::size_t sid_den;
    double is_px;
    std::string label;
};

inline constexpr double kTableNormalizerPx = 2654.05;

const std::vector<MetricRow>& metric_table();

struct UntestedRow {
    std::string id;
    ierisk::FeatureRow x;
    std::string expected;
};
const std::vector<UntestedRow>& untested_rows();

std::vector<ierisk::TrainingRow> training_rows();

// Control-room interface: four systems on an overview screen, eleven
// detail screens whose element counts and similar-name pairs reproduce
// the table. Screens are 1920 x 1080; elements sit on a 10 x 6 grid.
ierisk::InterfaceGraph graph();

// 0.95 for listed similar pairs, 1 for identical names, 0.2 otherwise.
ierisk::NameSimilarity similarity();

// Horizontal zigzag inside a 1920 px wide screen, ending at `end`, whose
// segment lengths sum to length_px.
std::vector<ierisk::Point> zigzag_to(ierisk::Point end, double length_px);

// Trajectory for a table row: zigzag ending at the target center.
std::vector<ierisk::Point> row_trajectory(const ierisk::InterfaceGraph& g, const MetricRow& row);

const std::set<std::string>& error_paths();
const std::set<std::string>& outcome_paths();
const std::set<std::string>& time_paths();

// One procedure per system, one step per table path (step id "S<digits>").
std::vector<ierisk::Procedure> procedures();

// Six participants, each executing every table path once. Durations are
// about 8 s; time paths are stretched 2.5x; each error path carries one
// annotation (outcome on outcome_paths(), execution otherwise).
std::vector<ierisk::SessionLog> sessions();

// 20-path interface for simulator recovery checks: two systems with ten
// leaf parameters each.
ierisk::InterfaceGraph sim_graph();
std::vector<std::string> sim_paths();

} // namespace fixture
