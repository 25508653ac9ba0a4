#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ierisk/graph.hpp"
#include "ierisk/ingest.hpp"

namespace ierisk {

// Shape parameter for operator-required time in control-room tasks.
inline constexpr double kDefaultTimeSigma = 0.28;
// t95 / median for a lognormal with sigma 0.28 (exp(1.645 * 0.28)).
inline constexpr double kP95ToMedian = 1.585;

struct LognormalTimeModel {
    double mu = 0.0;                  // ln seconds
    double sigma = kDefaultTimeSigma;

    double median() const;
};

double median_from_p95(double t95_seconds);

// Lower of the two middle values for even counts.
double lower_median(std::vector<double> values);

LognormalTimeModel fit_time_model(std::span<const double> durations, double sigma = kDefaultTimeSigma);

// 1 - Phi(z) computed with erfc, accurate in the far tail.
double standard_normal_sf(double z);

// P(T > t) for T ~ Lognormal(mu, sigma).
double tail_prob(const LognormalTimeModel& model, double t_seconds);

struct CategoryWarning {
    std::string category;
    std::string message;
};

struct CategoryStats {
    double mean_log = 0.0;
    double std_log = 0.0;       // sample (n-1) std of pooled log durations
    std::size_t n_samples = 0;
    std::size_t n_paths = 0;
    LognormalTimeModel model;   // mu = ln(pooled median), fixed sigma
};

struct TimeDeviationResult {
    std::set<std::string> flagged;
    std::map<std::string, double> z_scores;
    // Tail probability of the category model at the path's median duration.
    std::map<std::string, double> tail_at_median;
    std::map<std::string, CategoryStats> categories;
    std::vector<CategoryWarning> warnings;
};

struct TimeDeviationOptions {
    double tau = 1.0;
    double sigma = kDefaultTimeSigma;
};

// Flags path p iff (ln median_p - mean of pooled log durations) / pooled
// std >= tau within p's category.
TimeDeviationResult detect_time_deviated(const std::map<std::string, std::vector<double>>& durations,
                                         const std::map<std::string, std::string>& grouping,
                                         const TimeDeviationOptions& options = {});

// path -> top-level system root of its chain.
std::map<std::string, std::string> category_grouping(const InterfaceGraph& graph,
                                                     const std::vector<std::string>& path_ids);

std::map<std::string, std::vector<double>> durations_of(const PathSamples& samples);

struct ErrorPathStat {
    double error_prob = 0.0;
    std::set<ErrorKind> kinds;
    std::size_t errors = 0;
    std::size_t attempts = 0;
};

struct ErrorPathOptions {
    double alpha = 1.0;            // Laplace pseudo-count
    // Paths whose raw rate errors/attempts falls below this floor are dropped.
    // The default keeps every path with at least one annotated error.
    double min_error_rate = 0.0;
};

std::map<std::string, ErrorPathStat> detect_error_paths(const PathSamples& samples,
                                                        const ErrorPathOptions& options = {});

enum class Provenance { error_path, time_path };
std::string_view to_string(Provenance p) noexcept;

struct PathRisk {
    std::string path_id;
    double error_prob = 0.0;
    std::set<ErrorKind> error_kinds;
    bool time_flag = false;
    double tail_prob_at_threshold = 0.0;
    std::set<Provenance> provenance;

    friend bool operator==(const PathRisk&, const PathRisk&) = default;
};

struct ResolvedProcedure {
    std::string procedure_id;
    std::vector<std::pair<std::string, std::string>> steps;  // step_id, path_id
};

// Resolves each step via its declared target_path, falling back to
// map_procedure_step on the step text.
ResolvedProcedure resolve_procedure(const InterfaceGraph& graph, const Procedure& procedure,
                                    const NameSimilarity& similarity,
                                    const StepMappingOptions& options = {});

struct FlaggedStep {
    std::string procedure_id;
    std::string step_id;
    std::string path_id;

    friend bool operator==(const FlaggedStep&, const FlaggedStep&) = default;
};

struct HfeReport {
    std::vector<PathRisk> candidates;                  // sorted by path_id
    std::map<std::string, std::size_t> per_procedure;  // distinct high-risk nodes
    std::vector<std::string> prioritized_procedures;
    std::vector<FlaggedStep> flagged_steps;            // candidate HFE steps

    friend bool operator==(const HfeReport&, const HfeReport&) = default;
};

HfeReport identify_hfes(const std::map<std::string, ErrorPathStat>& error_paths,
                        const TimeDeviationResult& time_paths, const InterfaceGraph& graph,
                        std::span<const ResolvedProcedure> procedures);

// CSV `path_id,t95_seconds` with optional header row.
std::map<std::string, double> load_t95_overrides(const std::filesystem::path& file);

// Empirical fit where durations exist; t95-derived median for the rest.
std::map<std::string, LognormalTimeModel> path_time_models(
    const std::map<std::string, std::vector<double>>& durations,
    const std::map<std::string, double>& t95_overrides, double sigma = kDefaultTimeSigma);

} // namespace ierisk
