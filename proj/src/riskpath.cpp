#include "ierisk/riskpath.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ierisk/error.hpp"

namespace ierisk {

double LognormalTimeModel::median() const { return std::exp(mu); }

double median_from_p95(double t95) {
    if (!(t95 > 0.0) || !std::isfinite(t95)) throw InvalidArgument("t95 must be positive");
    return t95 / kP95ToMedian;
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of empty sample");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

LognormalTimeModel fit_time_model(std::span<const double> durations, double sigma) {
    if (durations.empty()) throw InvalidArgument("cannot fit a time model to an empty sample");
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    for (double d : durations) {
        if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("durations must be positive");
    }
    return {std::log(lower_median({durations.begin(), durations.end()})), sigma};
}

double standard_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double tail_prob(const LognormalTimeModel& m, double t) {
    if (!(t > 0.0)) throw InvalidArgument("tail_prob requires t > 0");
    if (!(m.sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    return standard_normal_sf((std::log(t) - m.mu) / m.sigma);
}

TimeDeviationResult detect_time_deviated(const std::map<std::string, std::vector<double>>& durations,
                                         const std::map<std::string, std::string>& grouping,
                                         const TimeDeviationOptions& options) {
    TimeDeviationResult out;
    // Zero-length steps carry no log-duration; they are dropped per path.
    std::map<std::string, std::vector<double>> positive;
    for (const auto& [path, ds] : durations) {
        std::vector<double> kept;
        for (double d : ds) {
            if (!std::isfinite(d)) throw InvalidArgument("non-finite duration on path " + path);
            if (d > 0.0) kept.push_back(d);
        }
        if (kept.size() != ds.size()) {
            out.warnings.push_back({path, std::to_string(ds.size() - kept.size()) +
                                              " non-positive duration(s) ignored"});
        }
        if (!kept.empty()) positive.emplace(path, std::move(kept));
    }

    std::map<std::string, std::vector<std::string>> members;
    for (const auto& [path, ds] : positive) {
        auto g = grouping.find(path);
        if (g == grouping.end()) throw InvalidArgument("path " + path + " has no category");
        members[g->second].push_back(path);
    }

    for (const auto& [category, paths] : members) {
        if (paths.size() < 2) {
            out.warnings.push_back({category, "category has fewer than two paths; skipped"});
            continue;
        }
        std::vector<double> pooled;
        std::vector<double> pooled_raw;
        for (const auto& p : paths) {
            for (double d : positive.at(p)) {
                pooled.push_back(std::log(d));
                pooled_raw.push_back(d);
            }
        }
        CategoryStats stats;
        stats.n_samples = pooled.size();
        stats.n_paths = paths.size();
        stats.mean_log = std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
        double ss = 0.0;
        for (double v : pooled) ss += (v - stats.mean_log) * (v - stats.mean_log);
        stats.std_log = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
        stats.model = fit_time_model(pooled_raw, options.sigma);

        for (const auto& p : paths) {
            const double med = lower_median(positive.at(p));
            out.tail_at_median[p] = tail_prob(stats.model, med);
            // Identical log durations: nothing deviates.
            if (!(stats.std_log > 1e-12)) continue;
            const double z = (std::log(med) - stats.mean_log) / stats.std_log;
            out.z_scores[p] = z;
            if (z >= options.tau) out.flagged.insert(p);
        }
        out.categories[category] = stats;
    }
    return out;
}

std::map<std::string, std::string> category_grouping(const InterfaceGraph& g,
                                                     const std::vector<std::string>& path_ids) {
    std::map<std::string, std::string> out;
    for (const auto& p : path_ids) {
        out[p] = resolve_path(g, p).node_chain.front();
    }
    return out;
}

std::map<std::string, std::vector<double>> durations_of(const PathSamples& samples) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [path, s] : samples) out[path] = s.durations;
    return out;
}

std::map<std::string, ErrorPathStat> detect_error_paths(const PathSamples& samples,
                                                        const ErrorPathOptions& options) {
    if (!(options.alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
    std::map<std::string, ErrorPathStat> out;
    for (const auto& [path, s] : samples) {
        const std::size_t errors = s.error_counts.total();
        if (errors == 0) continue;
        if (s.attempts == 0) throw InvalidArgument("path " + path + " has errors but no attempts");
        const double raw_rate = static_cast<double>(errors) / static_cast<double>(s.attempts);
        if (raw_rate < options.min_error_rate) continue;
        ErrorPathStat stat;
        stat.errors = errors;
        stat.attempts = s.attempts;
        stat.error_prob = (static_cast<double>(errors) + options.alpha) /
                          (static_cast<double>(s.attempts) + 2.0 * options.alpha);
        if (s.error_counts.execution > 0) stat.kinds.insert(ErrorKind::execution);
        if (s.error_counts.outcome > 0) stat.kinds.insert(ErrorKind::outcome);
        out.emplace(path, std::move(stat));
    }
    return out;
}

std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::error_path ? "error_path" : "time_path";
}

ResolvedProcedure resolve_procedure(const InterfaceGraph& g, const Procedure& procedure,
                                    const NameSimilarity& similarity, const StepMappingOptions& options) {
    ResolvedProcedure out{procedure.procedure_id, {}};
    for (const auto& step : procedure.steps) {
        if (step.target_path) {
            resolve_path(g, *step.target_path);  // throws on unknown path
            out.steps.emplace_back(step.step_id, *step.target_path);
        } else {
            out.steps.emplace_back(step.step_id, map_procedure_step(g, step.text, similarity, options).path_id);
        }
    }
    return out;
}

HfeReport identify_hfes(const std::map<std::string, ErrorPathStat>& error_paths,
                        const TimeDeviationResult& time_paths, const InterfaceGraph& g,
                        std::span<const ResolvedProcedure> procedures) {
    std::map<std::string, PathRisk> merged;
    auto entry = [&](const std::string& path) -> PathRisk& {
        if (!g.find(node_id_for(path))) throw GraphError(path, "HFE candidate path not in graph");
        auto& r = merged[path];
        r.path_id = path;
        if (auto it = time_paths.tail_at_median.find(path); it != time_paths.tail_at_median.end()) {
            r.tail_prob_at_threshold = it->second;
        }
        return r;
    };
    for (const auto& [path, stat] : error_paths) {
        auto& r = entry(path);
        r.error_prob = stat.error_prob;
        r.error_kinds = stat.kinds;
        r.provenance.insert(Provenance::error_path);
    }
    for (const auto& path : time_paths.flagged) {
        auto& r = entry(path);
        r.time_flag = true;
        r.provenance.insert(Provenance::time_path);
    }

    HfeReport report;
    std::set<std::string> risky_nodes;
    for (auto& [path, risk] : merged) {
        risky_nodes.insert(node_id_for(path));
        report.candidates.push_back(std::move(risk));
    }

    for (const auto& proc : procedures) {
        std::set<std::string> hit;
        for (const auto& [step_id, path] : proc.steps) {
            const std::string node = node_id_for(path);
            if (risky_nodes.contains(node)) {
                hit.insert(node);
                report.flagged_steps.push_back({proc.procedure_id, step_id, path});
            }
        }
        report.per_procedure[proc.procedure_id] = hit.size();
    }
    for (const auto& [id, count] : report.per_procedure) report.prioritized_procedures.push_back(id);
    std::stable_sort(report.prioritized_procedures.begin(), report.prioritized_procedures.end(),
                     [&](const std::string& a, const std::string& b) {
                         return report.per_procedure.at(a) > report.per_procedure.at(b);
                     });
    return report;
}

std::map<std::string, double> load_t95_overrides(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open t95 file " + file.string());
    std::map<std::string, double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(line_no, "expected path_id,t95_seconds");
        const std::string path = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        if (line_no == 1 && path == "path_id") continue;
        double t95 = 0.0;
        try {
            std::size_t used = 0;
            t95 = std::stod(value, &used);
            if (value.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(line_no, "t95_seconds is not a number");
        }
        if (!(t95 > 0.0)) throw ParseError(line_no, "t95_seconds must be positive");
        out[path] = t95;
    }
    return out;
}

std::map<std::string, LognormalTimeModel> path_time_models(
    const std::map<std::string, std::vector<double>>& durations,
    const std::map<std::string, double>& t95_overrides, double sigma) {
    std::map<std::string, LognormalTimeModel> out;
    for (const auto& [path, ds] : durations) {
        if (!ds.empty()) out[path] = fit_time_model(ds, sigma);
    }
    for (const auto& [path, t95] : t95_overrides) {
        if (!out.contains(path)) out[path] = {std::log(median_from_p95(t95)), sigma};
    }
    return out;
}

} // namespace ierisk
