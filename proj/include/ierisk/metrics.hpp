#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ierisk/graph.hpp"
#include "ierisk/similarity.hpp"

namespace ierisk {

struct MetricRaw {
    std::size_t n_elements = 0;
    std::size_t n_high_similarity = 0;
    std::size_t n_comparisons = 0;
    double traversal_px = 0.0;
    double normalizer_px = 0.0;

    friend bool operator==(const MetricRaw&, const MetricRaw&) = default;
};

struct MetricVector {
    double vd = 0.0;
    double sid = 0.0;
    double is_norm = 0.0;
    bool sid_undefined = false;  // no other element to compare against; sid reported as 0
    MetricRaw raw;
    std::vector<std::string> similar_names;

    friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

// 1 / number of elements on the target's screen (target included).
double visual_density(std::span<const std::string> screen_element_ids, std::string_view target_id);

struct SidResult {
    std::size_t numerator = 0;
    std::size_t denominator = 0;
    double ratio = 0.0;
    bool undefined = false;
    std::vector<std::string> contributing;
};

inline constexpr double kDefaultSidThreshold = 0.8;

// Counts other names whose similarity to the target strictly exceeds theta.
SidResult semantic_interference_density(std::string_view target_name,
                                        std::span<const std::string> other_names,
                                        const NameSimilarity& similarity,
                                        double theta = kDefaultSidThreshold);

// Alternative reading: all unordered name pairs on the screen over C(n, 2).
SidResult semantic_interference_pairwise(std::span<const std::string> names,
                                         const NameSimilarity& similarity,
                                         double theta = kDefaultSidThreshold);

// Sum of Euclidean lengths of consecutive segments.
double traversal_length(std::span<const Point> trajectory);

double interaction_span(std::span<const Point> trajectory, double normalizer_px);

// Normalizer used by the published metric table.
inline constexpr double kPublishedNormalizerPx = 2654.05;

struct MetricsConfig {
    double theta = kDefaultSidThreshold;
    std::optional<double> normalizer_px;  // default: graph layout diagonal
    bool pairwise_sid = false;
};

MetricVector metric_vector(const InterfaceGraph& graph, const ExecutionPath& path,
                           std::span<const Point> trajectory, const NameSimilarity& similarity,
                           const MetricsConfig& config = {});

struct PathMetrics {
    std::string path_id;
    MetricVector metrics;
};

// `path_id,vd_num,vd_den,sid_num,sid_den,is_num_px,is_den_px,vd,sid,is`
void write_metrics_csv(std::ostream& out, std::span<const PathMetrics> rows);

} // namespace ierisk
