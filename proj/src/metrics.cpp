#include "ierisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "ierisk/error.hpp"

namespace ierisk {

double visual_density(std::span<const std::string> ids, std::string_view target_id) {
    if (std::find(ids.begin(), ids.end(), target_id) == ids.end()) {
        throw InvalidArgument("target " + std::string(target_id) + " is not on the screen");
    }
    return 1.0 / static_cast<double>(ids.size());
}

SidResult semantic_interference_density(std::string_view target_name, std::span<const std::string> others,
                                        const NameSimilarity& similarity, double theta) {
    if (!(theta > 0.0)) throw InvalidArgument("SID threshold must be positive");
    SidResult r;
    r.denominator = others.size();
    for (const auto& name : others) {
        if (similarity(target_name, name) > theta) {
            ++r.numerator;
            r.contributing.push_back(name);
        }
    }
    r.undefined = r.denominator == 0;
    r.ratio = r.undefined ? 0.0 : static_cast<double>(r.numerator) / static_cast<double>(r.denominator);
    return r;
}

SidResult semantic_interference_pairwise(std::span<const std::string> names, const NameSimilarity& similarity,
                                         double theta) {
    if (!(theta > 0.0)) throw InvalidArgument("SID threshold must be positive");
    SidResult r;
    r.denominator = names.size() * (names.size() - (names.empty() ? 0 : 1)) / 2;
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            if (similarity(names[i], names[j]) > theta) {
                ++r.numerator;
                r.contributing.push_back(names[i] + " ~ " + names[j]);
            }
        }
    }
    r.undefined = r.denominator == 0;
    r.ratio = r.undefined ? 0.0 : static_cast<double>(r.numerator) / static_cast<double>(r.denominator);
    return r;
}

double traversal_length(std::span<const Point> trajectory) {
    double total = 0.0;
    for (std::size_t i = 1; i < trajectory.size(); ++i) {
        total += std::hypot(trajectory[i].x - trajectory[i - 1].x, trajectory[i].y - trajectory[i - 1].y);
    }
    return total;
}

double interaction_span(std::span<const Point> trajectory, double normalizer_px) {
    if (!(normalizer_px > 0.0) || !std::isfinite(normalizer_px)) {
        throw InvalidArgument("interaction span normalizer must be positive");
    }
    if (trajectory.empty()) throw InvalidArgument("interaction span needs at least one point");
    return traversal_length(trajectory) / normalizer_px;
}

MetricVector metric_vector(const InterfaceGraph& g, const ExecutionPath& path, std::span<const Point> trajectory,
                           const NameSimilarity& similarity, const MetricsConfig& config) {
    if (path.node_chain.empty()) throw InvalidArgument("path " + path.path_id + " has an empty chain");
    const InterfaceElement* target = g.find(path.terminal());
    if (!target) throw GraphError(path.terminal(), "path target not in graph");
    if (!g.find_screen(target->screen_id)) throw GraphError(target->id, "target screen unknown");

    std::vector<std::string> ids;
    std::vector<std::string> others;
    std::vector<std::string> all_names;
    for (const auto* e : g.on_screen(target->screen_id)) {
        ids.push_back(e->id);
        all_names.push_back(e->name);
        if (e != target) others.push_back(e->name);
    }

    const double normalizer = config.normalizer_px.value_or(g.layout_diagonal());

    MetricVector mv;
    mv.vd = visual_density(ids, target->id);
    const SidResult sid = config.pairwise_sid
                              ? semantic_interference_pairwise(all_names, similarity, config.theta)
                              : semantic_interference_density(target->name, others, similarity, config.theta);
    mv.sid = sid.ratio;
    mv.sid_undefined = sid.undefined;
    mv.similar_names = sid.contributing;
    mv.is_norm = interaction_span(trajectory, normalizer);
    mv.raw = {ids.size(), sid.numerator, sid.denominator, traversal_length(trajectory), normalizer};
    return mv;
}

void write_metrics_csv(std::ostream& out, std::span<const PathMetrics> rows) {
    out << "path_id,vd_num,vd_den,sid_num,sid_den,is_num_px,is_den_px,vd,sid,is\n";
    const auto flags = out.flags();
    const auto prec = out.precision();
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.path_id << ",1," << m.raw.n_elements << ',' << m.raw.n_high_similarity << ','
            << m.raw.n_comparisons << ',' << std::fixed << std::setprecision(2) << m.raw.traversal_px << ','
            << m.raw.normalizer_px << std::defaultfloat << std::setprecision(10) << ',' << m.vd << ','
            << m.sid << ',' << m.is_norm << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

} // namespace ierisk
