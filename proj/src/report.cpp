#include "ierisk/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"

namespace ierisk {

using nlohmann::json;

std::string_view to_string(ConflictQuadrant q) noexcept {
    switch (q) {
    case ConflictQuadrant::conflict_and_error: return "conflict_and_error";
    case ConflictQuadrant::conflict_only: return "conflict_only";
    case ConflictQuadrant::error_only: return "error_only";
    case ConflictQuadrant::neither: return "neither";
    }
    return "neither";
}

std::optional<ConflictQuadrant> parse_conflict_quadrant(std::string_view text) noexcept {
    for (auto q : {ConflictQuadrant::conflict_and_error, ConflictQuadrant::conflict_only, ConflictQuadrant::error_only,
                   ConflictQuadrant::neither}) {
        if (to_string(q) == text) return q;
    }
    return std::nullopt;
}

std::set<std::string> default_conflict_set() {
    std::set<std::string> out;
    for (const auto& row : pif_weight_table()) {
        if (row.max_weight() >= 3.0) out.insert(row.label);
    }
    return out;
}

ConflictQuadrant conflict_quadrant(std::string_view pif_label, bool error_observed,
                                   const std::set<std::string>& conflict_set) {
    pif_weights(pif_label);
    for (const auto& l : conflict_set) pif_weights(l);
    const bool conflict = conflict_set.contains(std::string(pif_label));
    if (conflict) return error_observed ? ConflictQuadrant::conflict_and_error : ConflictQuadrant::conflict_only;
    return error_observed ? ConflictQuadrant::error_only : ConflictQuadrant::neither;
}

GraphSummary summarize_graph(const InterfaceGraph& g) {
    GraphSummary s;
    s.screens = g.screens().size();
    s.elements = g.elements().size();
    s.roots = g.roots().size();
    for (const auto& e : g.elements()) {
        if (g.is_leaf(e.id)) ++s.leaves;
    }
    return s;
}

RiskReport assemble_report(const InterfaceGraph& g, const HfeReport& hfe, std::span<const PathAnalysis> analyses,
                           std::span<const std::string> pif_labels, const ToolConfig& config,
                           std::string generated_at) {
    RiskReport r;
    r.config_fingerprint = config_fingerprint(config);
    r.generated_at = std::move(generated_at);
    r.graph = summarize_graph(g);
    r.hfe = hfe;

    const std::set<std::string> conflict_set = config.conflict_set.empty() ? default_conflict_set() : config.conflict_set;
    r.conflict_set.assign(conflict_set.begin(), conflict_set.end());
    std::sort(r.conflict_set.begin(), r.conflict_set.end(), [](const auto& a, const auto& b) { return label_less(a, b); });

    auto require = [&](const std::string& path) {
        if (!g.find(node_id_for(path))) throw GraphError(path, "report path not in graph");
    };

    std::map<std::string, PathReport> by_path;
    std::map<std::string, const PathRisk*> risk;
    std::set<std::string> seen;
    for (const auto& c : hfe.candidates) {
        require(c.path_id);
        if (!seen.insert(c.path_id).second) throw InvalidArgument("duplicate HFE candidate " + c.path_id);
        risk[c.path_id] = &c;
        auto& pr = by_path[c.path_id];
        pr.path_id = c.path_id;
    }
    for (const auto& a : analyses) {
        require(a.path_id);
        auto& pr = by_path[a.path_id];
        pr.path_id = a.path_id;
        pr.metrics = a.metrics;
        if (a.prediction) {
            pr.pif_label = a.prediction->label;
            pr.probabilities = a.prediction->probabilities;
        }
    }
    r.pif_labels.assign(pif_labels.begin(), pif_labels.end());
    for (const auto& a : analyses) {
        if (a.prediction && a.prediction->probabilities.size() != r.pif_labels.size()) {
            throw InvalidArgument("prediction for " + a.path_id + " does not match the label order");
        }
    }

    for (auto& [path, pr] : by_path) {
        if (auto it = risk.find(path); it != risk.end()) {
            pr.error_observed = it->second->provenance.contains(Provenance::error_path);
            pr.outcome_error = it->second->error_kinds.contains(ErrorKind::outcome);
        }
        if (pr.pif_label) {
            pr.quadrant = conflict_quadrant(*pr.pif_label, pr.error_observed, conflict_set);
            ++r.conflicts.counts[*pr.quadrant];
            if (*pr.quadrant == ConflictQuadrant::conflict_and_error) r.conflicts.conflict_and_error_paths.push_back(path);
        }
        if (pr.outcome_error) {
            ++r.conflicts.outcome_error_paths;
            if (pr.quadrant == ConflictQuadrant::conflict_and_error) ++r.conflicts.outcome_conflict_and_error;
        }
        r.paths.push_back(pr);
    }
    return r;
}

SessionAnalysis analyze_sessions(const InterfaceGraph& g, std::span<const Procedure> procedures,
                                 std::span<const SessionLog> sessions, const NameSimilarity& similarity,
                                 const ToolConfig& config) {
    SessionAnalysis a;
    const StepTargets targets = step_targets(procedures);
    a.traces.reserve(sessions.size());
    for (const auto& s : sessions) a.traces.push_back(align_events(g, s, targets));
    a.samples = path_samples(a.traces);

    std::vector<std::string> ids;
    for (const auto& [path, _] : a.samples) ids.push_back(path);
    a.grouping = category_grouping(g, ids);
    a.time = detect_time_deviated(durations_of(a.samples), a.grouping, config.time);
    a.errors = detect_error_paths(a.samples, config.errors);
    for (const auto& p : procedures) a.procedures.push_back(resolve_procedure(g, p, similarity));
    a.hfe = identify_hfes(a.errors, a.time, g, a.procedures);
    return a;
}

std::vector<PathMetrics> path_metrics(const InterfaceGraph& g, std::span<const AlignedTrace> traces,
                                      const NameSimilarity& similarity, const MetricsConfig& config) {
    std::map<std::string, std::vector<const AlignedStep*>> by_path;
    for (const auto& t : traces) {
        for (const auto& st : t.steps) {
            if (!st.trajectory.empty()) by_path[st.path_id].push_back(&st);
        }
    }
    std::vector<PathMetrics> out;
    for (const auto& [path, steps] : by_path) {
        const ExecutionPath ep = resolve_path(g, path);
        MetricVector m = metric_vector(g, ep, steps.front()->trajectory, similarity, config);
        double traversal = 0.0;
        double span = 0.0;
        for (const auto* st : steps) {
            traversal += traversal_length(st->trajectory);
            span += interaction_span(st->trajectory, m.raw.normalizer_px);
        }
        const auto n = static_cast<double>(steps.size());
        m.raw.traversal_px = traversal / n;
        m.is_norm = span / n;
        out.push_back({path, std::move(m)});
    }
    return out;
}

std::vector<PathAnalysis> predict_paths(const PifModel& model, std::span<const PathMetrics> metrics) {
    std::vector<PathAnalysis> out;
    for (const auto& pm : metrics) out.push_back({pm.path_id, pm.metrics, predict(model, features_of(pm.metrics))});
    return out;
}

json metric_vector_to_json(const MetricVector& m) {
    return {{"vd", m.vd},
            {"sid", m.sid},
            {"is", m.is_norm},
            {"sid_undefined", m.sid_undefined},
            {"similar_names", m.similar_names},
            {"raw",
             {{"n_elements", m.raw.n_elements},
              {"n_high_similarity", m.raw.n_high_similarity},
              {"n_comparisons", m.raw.n_comparisons},
              {"traversal_px", m.raw.traversal_px},
              {"normalizer_px", m.raw.normalizer_px}}}};
}

MetricVector metric_vector_from_json(const json& j) {
    MetricVector m;
    m.vd = j.at("vd").get<double>();
    m.sid = j.at("sid").get<double>();
    m.is_norm = j.at("is").get<double>();
    m.sid_undefined = j.at("sid_undefined").get<bool>();
    m.similar_names = j.at("similar_names").get<std::vector<std::string>>();
    const auto& raw = j.at("raw");
    m.raw.n_elements = raw.at("n_elements").get<std::size_t>();
    m.raw.n_high_similarity = raw.at("n_high_similarity").get<std::size_t>();
    m.raw.n_comparisons = raw.at("n_comparisons").get<std::size_t>();
    m.raw.traversal_px = raw.at("traversal_px").get<double>();
    m.raw.normalizer_px = raw.at("normalizer_px").get<double>();
    return m;
}

json hfe_to_json(const HfeReport& hfe) {
    json candidates = json::array();
    for (const auto& c : hfe.candidates) {
        json kinds = json::array();
        for (auto k : c.error_kinds) kinds.push_back(to_string(k));
        json prov = json::array();
        for (auto p : c.provenance) prov.push_back(to_string(p));
        candidates.push_back({{"path_id", c.path_id},
                              {"error_prob", c.error_prob},
                              {"error_kinds", kinds},
                              {"time_flag", c.time_flag},
                              {"tail_prob_at_threshold", c.tail_prob_at_threshold},
                              {"provenance", prov}});
    }
    json steps = json::array();
    for (const auto& s : hfe.flagged_steps) {
        steps.push_back({{"procedure_id", s.procedure_id}, {"step_id", s.step_id}, {"path_id", s.path_id}});
    }
    return {{"candidates", candidates},
            {"per_procedure", hfe.per_procedure},
            {"prioritized_procedures", hfe.prioritized_procedures},
            {"flagged_steps", steps}};
}

HfeReport hfe_from_json(const json& j) {
    HfeReport hfe;
    for (const auto& c : j.at("candidates")) {
        PathRisk r;
        r.path_id = c.at("path_id").get<std::string>();
        r.error_prob = c.at("error_prob").get<double>();
        for (const auto& k : c.at("error_kinds")) {
            auto kind = parse_error_kind(k.get<std::string>());
            if (!kind) throw InvalidArgument("unknown error kind in report");
            r.error_kinds.insert(*kind);
        }
        r.time_flag = c.at("time_flag").get<bool>();
        r.tail_prob_at_threshold = c.at("tail_prob_at_threshold").get<double>();
        for (const auto& p : c.at("provenance")) {
            const auto s = p.get<std::string>();
            if (s == "error_path") r.provenance.insert(Provenance::error_path);
            else if (s == "time_path") r.provenance.insert(Provenance::time_path);
            else throw InvalidArgument("unknown provenance " + s);
        }
        hfe.candidates.push_back(std::move(r));
    }
    hfe.per_procedure = j.at("per_procedure").get<std::map<std::string, std::size_t>>();
    hfe.prioritized_procedures = j.at("prioritized_procedures").get<std::vector<std::string>>();
    for (const auto& s : j.at("flagged_steps")) {
        hfe.flagged_steps.push_back({s.at("procedure_id").get<std::string>(), s.at("step_id").get<std::string>(),
                                     s.at("path_id").get<std::string>()});
    }
    return hfe;
}

json report_to_json(const RiskReport& r) {
    json paths = json::array();
    for (const auto& p : r.paths) {
        json jp = {{"path_id", p.path_id},
                   {"metrics", p.metrics ? metric_vector_to_json(*p.metrics) : json(nullptr)},
                   {"pif_label", p.pif_label ? json(*p.pif_label) : json(nullptr)},
                   {"probabilities", p.probabilities},
                   {"error_observed", p.error_observed},
                   {"outcome_error", p.outcome_error},
                   {"quadrant", p.quadrant ? json(to_string(*p.quadrant)) : json(nullptr)}};
        paths.push_back(std::move(jp));
    }
    json counts = json::object();
    for (auto q : {ConflictQuadrant::conflict_and_error, ConflictQuadrant::conflict_only, ConflictQuadrant::error_only,
                   ConflictQuadrant::neither}) {
        auto it = r.conflicts.counts.find(q);
        counts[std::string(to_string(q))] = it == r.conflicts.counts.end() ? 0 : it->second;
    }
    return {{"schema_version", r.schema_version},
            {"tool", {{"name", "ierisk"}, {"version", r.tool_version}}},
            {"config_fingerprint", r.config_fingerprint},
            {"generated_at", r.generated_at},
            {"graph",
             {{"screens", r.graph.screens},
              {"elements", r.graph.elements},
              {"roots", r.graph.roots},
              {"leaves", r.graph.leaves}}},
            {"hfe", hfe_to_json(r.hfe)},
            {"pif_labels", r.pif_labels},
            {"paths", paths},
            {"conflict_set", r.conflict_set},
            {"conflicts",
             {{"counts", counts},
              {"outcome_error_paths", r.conflicts.outcome_error_paths},
              {"outcome_conflict_and_error", r.conflicts.outcome_conflict_and_error},
              {"conflict_and_error_paths", r.conflicts.conflict_and_error_paths}}}};
}

RiskReport report_from_json(const json& j) {
    try {
        RiskReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion) throw InvalidArgument("unsupported report schema version");
        r.tool_version = j.at("tool").at("version").get<std::string>();
        r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        r.generated_at = j.at("generated_at").get<std::string>();
        const auto& g = j.at("graph");
        r.graph = {g.at("screens").get<std::size_t>(), g.at("elements").get<std::size_t>(),
                   g.at("roots").get<std::size_t>(), g.at("leaves").get<std::size_t>()};
        r.hfe = hfe_from_json(j.at("hfe"));
        r.pif_labels = j.at("pif_labels").get<std::vector<std::string>>();
        for (const auto& jp : j.at("paths")) {
            PathReport p;
            p.path_id = jp.at("path_id").get<std::string>();
            if (!jp.at("metrics").is_null()) p.metrics = metric_vector_from_json(jp.at("metrics"));
            if (!jp.at("pif_label").is_null()) p.pif_label = jp.at("pif_label").get<std::string>();
            p.probabilities = jp.at("probabilities").get<std::vector<double>>();
            p.error_observed = jp.at("error_observed").get<bool>();
            p.outcome_error = jp.at("outcome_error").get<bool>();
            if (!jp.at("quadrant").is_null()) {
                p.quadrant = parse_conflict_quadrant(jp.at("quadrant").get<std::string>());
                if (!p.quadrant) throw InvalidArgument("unknown quadrant in report");
            }
            r.paths.push_back(std::move(p));
        }
        r.conflict_set = j.at("conflict_set").get<std::vector<std::string>>();
        const auto& c = j.at("conflicts");
        for (const auto& [name, n] : c.at("counts").items()) {
            auto q = parse_conflict_quadrant(name);
            if (!q) throw InvalidArgument("unknown quadrant in report");
            if (n.get<std::size_t>() > 0) r.conflicts.counts[*q] = n.get<std::size_t>();
        }
        r.conflicts.outcome_error_paths = c.at("outcome_error_paths").get<std::size_t>();
        r.conflicts.outcome_conflict_and_error = c.at("outcome_conflict_and_error").get<std::size_t>();
        r.conflicts.conflict_and_error_paths = c.at("conflict_and_error_paths").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed report: ") + e.what());
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_candidates_csv(std::ostream& out, const HfeReport& hfe) {
    out << "path_id,error_prob,error_kinds,time_flag,tail_prob,provenance\n";
    const auto prec = out.precision(10);
    for (const auto& c : hfe.candidates) {
        std::string kinds;
        for (auto k : c.error_kinds) kinds += (kinds.empty() ? "" : "|") + std::string(to_string(k));
        std::string prov;
        for (auto p : c.provenance) prov += (prov.empty() ? "" : "|") + std::string(to_string(p));
        out << c.path_id << ',' << c.error_prob << ',' << kinds << ',' << (c.time_flag ? "true" : "false") << ','
            << c.tail_prob_at_threshold << ',' << prov << '\n';
    }
    out.precision(prec);
}

void write_path_table_csv(std::ostream& out, const RiskReport& report) {
    out << "path_id,pif_label,quadrant,vd,sid,is\n";
    const auto prec = out.precision(10);
    for (const auto& p : report.paths) {
        out << p.path_id << ',' << p.pif_label.value_or("") << ','
            << (p.quadrant ? to_string(*p.quadrant) : std::string_view{}) << ',';
        if (p.metrics) out << p.metrics->vd << ',' << p.metrics->sid << ',' << p.metrics->is_norm;
        else out << ",,";
        out << '\n';
    }
    out.precision(prec);
}

void write_duration_histograms_csv(std::ostream& out, const std::map<std::string, std::vector<double>>& durations,
                                   const std::map<std::string, std::string>& grouping, double bin_width_s) {
    if (!(bin_width_s > 0.0)) throw InvalidArgument("bin width must be positive");
    std::map<std::string, std::vector<double>> pooled;
    for (const auto& [path, ds] : durations) {
        auto g = grouping.find(path);
        if (g == grouping.end()) throw InvalidArgument("path " + path + " has no category");
        auto& v = pooled[g->second];
        v.insert(v.end(), ds.begin(), ds.end());
    }
    out << "category,bin_lo_s,bin_hi_s,count\n";
    for (const auto& [category, ds] : pooled) {
        if (ds.empty()) continue;
        const double hi = *std::max_element(ds.begin(), ds.end());
        const auto bins = static_cast<std::size_t>(std::floor(std::max(hi, 0.0) / bin_width_s)) + 1;
        std::vector<std::size_t> counts(bins, 0);
        for (double d : ds) {
            const auto b = static_cast<std::size_t>(std::floor(std::max(d, 0.0) / bin_width_s));
            ++counts[std::min(b, bins - 1)];
        }
        for (std::size_t b = 0; b < bins; ++b) {
            out << category << ',' << static_cast<double>(b) * bin_width_s << ','
                << static_cast<double>(b + 1) * bin_width_s << ',' << counts[b] << '\n';
        }
    }
}

} // namespace ierisk
