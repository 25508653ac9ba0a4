#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ierisk/config.hpp"
#include "ierisk/graph.hpp"
#include "ierisk/ingest.hpp"
#include "ierisk/metrics.hpp"
#include "ierisk/pifnet.hpp"
#include "ierisk/riskpath.hpp"

namespace ierisk {

inline constexpr int kReportSchemaVersion = 1;

enum class ConflictQuadrant { conflict_and_error, conflict_only, error_only, neither };

std::string_view to_string(ConflictQuadrant q) noexcept;
std::optional<ConflictQuadrant> parse_conflict_quadrant(std::string_view text) noexcept;

// Labels whose largest macro-cognitive weight is at least 3.
std::set<std::string> default_conflict_set();

ConflictQuadrant conflict_quadrant(std::string_view pif_label, bool error_observed,
                                   const std::set<std::string>& conflict_set);

struct GraphSummary {
    std::size_t screens = 0;
    std::size_t elements = 0;
    std::size_t roots = 0;
    std::size_t leaves = 0;

    friend bool operator==(const GraphSummary&, const GraphSummary&) = default;
};

struct PathAnalysis {
    std::string path_id;
    std::optional<MetricVector> metrics;
    std::optional<Prediction> prediction;
};

struct PathReport {
    std::string path_id;
    std::optional<MetricVector> metrics;
    std::optional<std::string> pif_label;
    std::vector<double> probabilities;
    bool error_observed = false;
    bool outcome_error = false;
    std::optional<ConflictQuadrant> quadrant;

    friend bool operator==(const PathReport&, const PathReport&) = default;
};

struct ConflictSummary {
    std::map<ConflictQuadrant, std::size_t> counts;
    std::size_t outcome_error_paths = 0;
    std::size_t outcome_conflict_and_error = 0;
    std::vector<std::string> conflict_and_error_paths;

    friend bool operator==(const ConflictSummary&, const ConflictSummary&) = default;
};

struct RiskReport {
    int schema_version = kReportSchemaVersion;
    std::string tool_version = kToolVersion;
    std::string config_fingerprint;
    std::string generated_at;
    GraphSummary graph;
    HfeReport hfe;
    std::vector<std::string> pif_labels;  // label order for probabilities
    std::vector<PathReport> paths;        // sorted by path_id
    std::vector<std::string> conflict_set;
    ConflictSummary conflicts;

    friend bool operator==(const RiskReport&, const RiskReport&) = default;
};

GraphSummary summarize_graph(const InterfaceGraph& graph);

// Every path in `hfe` and `analyses` must exist in the graph (GraphError).
RiskReport assemble_report(const InterfaceGraph& graph, const HfeReport& hfe,
                           std::span<const PathAnalysis> analyses,
                           std::span<const std::string> pif_labels, const ToolConfig& config,
                           std::string generated_at);

nlohmann::json report_to_json(const RiskReport& report);
RiskReport report_from_json(const nlohmann::json& j);

nlohmann::json hfe_to_json(const HfeReport& hfe);
HfeReport hfe_from_json(const nlohmann::json& j);

nlohmann::json metric_vector_to_json(const MetricVector& m);
MetricVector metric_vector_from_json(const nlohmann::json& j);

// Session-driven half of the pipeline: align, aggregate, detect, rank.
struct SessionAnalysis {
    std::vector<AlignedTrace> traces;
    PathSamples samples;
    std::map<std::string, std::string> grouping;  // path -> system root
    TimeDeviationResult time;
    std::map<std::string, ErrorPathStat> errors;
    std::vector<ResolvedProcedure> procedures;
    HfeReport hfe;
};

SessionAnalysis analyze_sessions(const InterfaceGraph& graph, std::span<const Procedure> procedures,
                                 std::span<const SessionLog> sessions, const NameSimilarity& similarity,
                                 const ToolConfig& config);

// One row per path with at least one recorded trajectory. VD and SID come
// from the layout; IS is the mean over all recorded instances.
std::vector<PathMetrics> path_metrics(const InterfaceGraph& graph, std::span<const AlignedTrace> traces,
                                      const NameSimilarity& similarity, const MetricsConfig& config);

std::vector<PathAnalysis> predict_paths(const PifModel& model, std::span<const PathMetrics> metrics);

// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

// `path_id,error_prob,error_kinds,time_flag,tail_prob,provenance`
void write_candidates_csv(std::ostream& out, const HfeReport& hfe);

// `path_id,pif_label,quadrant,vd,sid,is`
void write_path_table_csv(std::ostream& out, const RiskReport& report);

// `category,bin_lo_s,bin_hi_s,count`, fixed-width bins from 0 per category.
void write_duration_histograms_csv(std::ostream& out, const std::map<std::string, std::vector<double>>& durations,
                                   const std::map<std::string, std::string>& grouping, double bin_width_s = 2.0);

} // namespace ierisk
