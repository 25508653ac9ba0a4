#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ierisk/config.hpp"
#include "ierisk/embed.hpp"
#include "ierisk/error.hpp"
#include "ierisk/graph.hpp"
#include "ierisk/ingest.hpp"
#include "ierisk/metrics.hpp"
#include "ierisk/pifnet.hpp"
#include "ierisk/report.hpp"
#include "ierisk/riskpath.hpp"
#include "ierisk/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ierisk;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitFatal = 2;

struct Globals {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

struct Inputs {
    std::string graph;
    std::vector<std::string> sessions;
    std::string procedures;
    std::string t95;
    std::string plan;
    std::string data;
    std::string model;
    std::string features;
};

ToolConfig load_tool_config(const Globals& g) {
    ToolConfig c = g.config_file.empty() ? ToolConfig{} : load_config_file(g.config_file);
    if (g.seed) c.pif_seed = *g.seed;
    return c;
}

// Explicit flag first, then the config's paths section.
std::string input(const std::string& flag, const ToolConfig& c, const std::string& role, bool required = true) {
    if (!flag.empty()) return flag;
    if (auto it = c.paths.find(role); it != c.paths.end()) return it->second;
    if (required) throw InvalidArgument("missing input: --" + role + " (or paths." + role + " in the config)");
    return {};
}

fs::path out_dir(const Globals& g) {
    fs::create_directories(g.out);
    return g.out;
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    return out;
}

void write_json(const fs::path& file, const json& j) {
    auto out = open_out(file);
    out << j.dump(2) << '\n';
}

std::vector<SessionLog> load_sessions(const std::vector<std::string>& sources) {
    std::vector<fs::path> files;
    for (const auto& s : sources) {
        if (fs::is_directory(s)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(s)) {
                if (entry.is_regular_file() && entry.path().extension() == ".jsonl") found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.emplace_back(s);
        }
    }
    std::vector<SessionLog> out;
    for (const auto& f : files) out.push_back(read_session_log(f));
    return out;
}

std::vector<std::string> session_sources(const Inputs& in, const ToolConfig& c) {
    if (!in.sessions.empty()) return in.sessions;
    return {input("", c, "sessions")};
}

// Similarity backed by the configured embedder. A remote endpoint that cannot
// be reached degrades to the local embedder with a warning.
class SimilarityBackend {
public:
    explicit SimilarityBackend(const EmbedConfig& cfg) {
        std::optional<fs::path> cache;
        if (cfg.cache_dir) cache = *cfg.cache_dir;
        local_ = std::make_unique<Embedder>(std::make_shared<LocalTrigramProvider>(), cache);
        if (cfg.provider == "remote") {
            RemoteEmbeddingConfig rc;
            rc.endpoint = cfg.endpoint;
            rc.model = cfg.model;
            rc.timeout = std::chrono::milliseconds(cfg.timeout_ms);
            remote_ = std::make_unique<Embedder>(std::make_shared<RemoteEmbeddingProvider>(rc), cache);
        }
    }

    NameSimilarity similarity() {
        return [this](std::string_view a, std::string_view b) {
            if (remote_) {
                try {
                    return cosine_similarity(remote_->embed(a), remote_->embed(b));
                } catch (const TransportError& e) {
                    std::cerr << "warning: " << e.what() << "; falling back to the local embedder\n";
                    remote_.reset();
                }
            }
            return cosine_similarity(local_->embed(a), local_->embed(b));
        };
    }

private:
    std::unique_ptr<Embedder> local_;
    std::unique_ptr<Embedder> remote_;
};

std::vector<Procedure> load_procedures_opt(const Inputs& in, const ToolConfig& c) {
    const auto file = input(in.procedures, c, "procedures", false);
    return file.empty() ? std::vector<Procedure>{} : load_procedures_file(file);
}

// `path_id,vd,sid,is[,label]`, header optional.
std::vector<std::pair<std::string, FeatureRow>> load_features(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open features " + file.string());
    std::vector<std::pair<std::string, FeatureRow>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() < 4 || cells.size() > 5) throw ParseError(line_no, "expected path_id,vd,sid,is[,label]");
        FeatureRow x{};
        try {
            for (std::size_t f = 0; f < 3; ++f) x[f] = std::stod(cells[f + 1]);
        } catch (const std::exception&) {
            if (line_no == 1) continue;
            throw ParseError(line_no, "feature is not a number");
        }
        out.emplace_back(cells[0], x);
    }
    return out;
}

PifModel train_model(const std::vector<TrainingRow>& rows, const ToolConfig& c) {
    PifModel model = PifModel::init(c.pif_seed, sorted_labels(rows));
    train(model, rows, c.pif_hyper);
    return model;
}

int cmd_graph_validate(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto file = input(in.graph, c, "graph");
    std::ifstream is(file);
    if (!is) throw Error("cannot open graph file " + file);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ParseError(0, file + ": " + e.what());
    }
    const auto graph = parse_graph(doc);
    const auto violations = validate_graph(graph);
    for (const auto& v : violations) std::cout << v.element_id << '\t' << v.rule << '\t' << v.detail << '\n';
    const auto s = summarize_graph(graph);
    std::cerr << s.screens << " screens, " << s.elements << " elements, " << violations.size() << " violations\n";
    return violations.empty() ? kExitOk : kExitInvalid;
}

int cmd_simulate(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto graph = load_graph_file(input(in.graph, c, "graph"));
    auto plan = load_plan_file(input(in.plan, c, "plan"));
    if (g.seed) plan.seed = *g.seed;
    const auto sessions = generate_sessions(graph, plan);
    const auto files = write_sessions(sessions, out_dir(g) / "sessions");
    std::cerr << "wrote " << files.size() << " sessions to " << (fs::path(g.out) / "sessions").string() << '\n';
    return kExitOk;
}

int cmd_ingest(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto graph = load_graph_file(input(in.graph, c, "graph"));
    const auto procedures = load_procedures_opt(in, c);
    const auto targets = step_targets(procedures);
    std::vector<AlignedTrace> traces;
    std::size_t unaligned = 0;
    for (const auto& s : load_sessions(session_sources(in, c))) {
        traces.push_back(align_events(graph, s, targets));
        for (const auto& u : traces.back().unaligned) {
            std::cerr << s.session_id << ": unaligned step " << u.step_id << ": " << u.message << '\n';
        }
        unaligned += traces.back().unaligned.size();
    }
    const auto dir = out_dir(g);
    json all = json::array();
    for (const auto& t : traces) all.push_back(trace_to_json(t));
    write_json(dir / "traces.json", all);

    auto out = open_out(dir / "path_samples.csv");
    out << "path_id,attempts,execution_errors,outcome_errors,median_s\n";
    for (const auto& [path, s] : path_samples(traces)) {
        out << path << ',' << s.attempts << ',' << s.error_counts.execution << ',' << s.error_counts.outcome << ',';
        if (!s.durations.empty()) out << lower_median(s.durations);
        out << '\n';
    }
    std::cerr << traces.size() << " sessions aligned, " << unaligned << " unaligned steps\n";
    return kExitOk;
}

int cmd_hfe(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto graph = load_graph_file(input(in.graph, c, "graph"));
    const auto procedures = load_procedures_opt(in, c);
    const auto sessions = load_sessions(session_sources(in, c));
    SimilarityBackend sim(c.embed);
    const auto a = analyze_sessions(graph, procedures, sessions, sim.similarity(), c);
    for (const auto& w : a.time.warnings) std::cerr << "warning: " << w.category << ": " << w.message << '\n';

    const auto dir = out_dir(g);
    write_json(dir / "hfe.json", hfe_to_json(a.hfe));
    {
        auto out = open_out(dir / "candidates.csv");
        write_candidates_csv(out, a.hfe);
    }
    {
        auto out = open_out(dir / "duration_histograms.csv");
        write_duration_histograms_csv(out, durations_of(a.samples), a.grouping);
    }
    const auto t95_file = input(in.t95, c, "t95", false);
    const auto overrides = t95_file.empty() ? std::map<std::string, double>{} : load_t95_overrides(t95_file);
    auto out = open_out(dir / "time_models.csv");
    out << "path_id,mu,sigma,median_s,source\n";
    const auto durations = durations_of(a.samples);
    for (const auto& [path, m] : path_time_models(durations, overrides, c.time.sigma)) {
        const bool empirical = durations.contains(path) && !durations.at(path).empty();
        out << path << ',' << std::setprecision(10) << m.mu << ',' << m.sigma << ',' << m.median() << ','
            << (empirical ? "empirical" : "t95") << '\n';
    }
    std::cerr << a.hfe.candidates.size() << " HFE candidates\n";
    return kExitOk;
}

int cmd_metrics(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto graph = load_graph_file(input(in.graph, c, "graph"));
    const auto procedures = load_procedures_opt(in, c);
    const auto targets = step_targets(procedures);
    std::vector<AlignedTrace> traces;
    for (const auto& s : load_sessions(session_sources(in, c))) traces.push_back(align_events(graph, s, targets));
    SimilarityBackend sim(c.embed);
    const auto rows = path_metrics(graph, traces, sim.similarity(), c.metrics);
    auto out = open_out(out_dir(g) / "metrics.csv");
    write_metrics_csv(out, rows);
    std::cerr << rows.size() << " paths\n";
    return kExitOk;
}

int cmd_pif_train(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto rows = load_training_csv(input(in.data, c, "training"));
    PifModel model = PifModel::init(c.pif_seed, sorted_labels(rows));
    const auto r = train(model, rows, c.pif_hyper);
    const fs::path file = in.model.empty() ? out_dir(g) / "pif_model.bin" : fs::path(in.model);
    model.save(file);
    std::cout << "final_loss " << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\ntraining_accuracy "
              << r.training_accuracy << '\n';
    std::cerr << "model written to " << file.string() << '\n';
    return kExitOk;
}

int cmd_pif_cv(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto rows = load_training_csv(input(in.data, c, "training"));
    const auto cv = kfold_cv(rows, c.cv_folds, c.pif_seed, c.pif_hyper);
    for (std::size_t f = 0; f < cv.fold_accuracies.size(); ++f) {
        std::cout << "fold " << f + 1 << ' ' << cv.fold_accuracies[f] << '\n';
    }
    std::cout << std::fixed << std::setprecision(4) << "mean " << cv.mean << " std " << cv.std << '\n';
    write_json(out_dir(g) / "cv.json",
               {{"seed", c.pif_seed}, {"folds", cv.folds}, {"fold_accuracies", cv.fold_accuracies}, {"mean", cv.mean},
                {"std", cv.std}});
    return kExitOk;
}

int cmd_pif_predict(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto model = PifModel::load(input(in.model, c, "model"));
    const auto rows = load_features(in.features);
    auto out = open_out(out_dir(g) / "predictions.csv");
    out << "path_id,label";
    for (const auto& l : model.labels()) out << ",p_" << l;
    out << '\n';
    for (const auto& [id, x] : rows) {
        const auto p = predict(model, x);
        out << id << ',' << p.label;
        std::cout << id << ' ' << p.label << '\n';
        for (double v : p.probabilities) out << ',' << std::setprecision(6) << v;
        out << '\n';
    }
    return kExitOk;
}

int cmd_report(const Globals& g, const Inputs& in) {
    const auto c = load_tool_config(g);
    const auto graph = load_graph_file(input(in.graph, c, "graph"));
    const auto procedures = load_procedures_opt(in, c);
    const auto sessions = load_sessions(session_sources(in, c));

    const auto model_file = input(in.model, c, "model", false);
    const PifModel model = model_file.empty() ? train_model(load_training_csv(input(in.data, c, "training")), c)
                                              : PifModel::load(model_file);

    SimilarityBackend sim(c.embed);
    const auto similarity = sim.similarity();
    const auto a = analyze_sessions(graph, procedures, sessions, similarity, c);
    const auto metrics = path_metrics(graph, a.traces, similarity, c.metrics);
    const auto analyses = predict_paths(model, metrics);
    const auto report = assemble_report(graph, a.hfe, analyses, model.labels(), c, utc_timestamp());

    const auto dir = out_dir(g);
    write_json(dir / "risk_report.json", report_to_json(report));
    {
        auto out = open_out(dir / "path_table.csv");
        write_path_table_csv(out, report);
    }
    {
        auto out = open_out(dir / "candidates.csv");
        write_candidates_csv(out, a.hfe);
    }
    {
        auto out = open_out(dir / "metrics.csv");
        write_metrics_csv(out, metrics);
    }
    auto out = open_out(dir / "duration_histograms.csv");
    write_duration_histograms_csv(out, durations_of(a.samples), a.grouping);

    std::cout << "candidates " << report.hfe.candidates.size() << '\n';
    for (const auto& [q, n] : report.conflicts.counts) std::cout << to_string(q) << ' ' << n << '\n';
    std::cout << "outcome_errors_in_conflict " << report.conflicts.outcome_conflict_and_error << '/'
              << report.conflicts.outcome_error_paths << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interface-embedded human reliability risk analysis"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Globals g;
    Inputs in;
    app.add_option("--config", g.config_file, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed overriding the plan or model seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    auto add_graph = [&](CLI::App* s) { s->add_option("--graph", in.graph, "Interface graph JSON"); };
    auto add_sessions = [&](CLI::App* s) {
        s->add_option("--sessions", in.sessions, "Session JSON-Lines files or directories");
        s->add_option("--procedures", in.procedures, "Procedures JSON");
    };

    int (*handler)(const Globals&, const Inputs&) = nullptr;
    auto bind = [&](CLI::App* s, int (*fn)(const Globals&, const Inputs&)) { s->callback([&handler, fn] { handler = fn; }); };

    auto* graph_cmd = app.add_subcommand("graph", "Interface graph tools");
    graph_cmd->require_subcommand(1);
    auto* validate = graph_cmd->add_subcommand("validate", "Check structural and geometric rules");
    add_graph(validate);
    bind(validate, cmd_graph_validate);

    auto* simulate = app.add_subcommand("simulate", "Generate synthetic sessions from a scenario plan");
    add_graph(simulate);
    simulate->add_option("--plan", in.plan, "Scenario plan JSON");
    bind(simulate, cmd_simulate);

    auto* ingest = app.add_subcommand("ingest", "Align session logs to execution paths");
    add_graph(ingest);
    add_sessions(ingest);
    bind(ingest, cmd_ingest);

    auto* hfe = app.add_subcommand("hfe", "Identify error paths, time-deviated paths and HFE candidates");
    add_graph(hfe);
    add_sessions(hfe);
    hfe->add_option("--t95", in.t95, "CSV path_id,t95_seconds");
    bind(hfe, cmd_hfe);

    auto* metrics = app.add_subcommand("metrics", "Per-path VD, SID and IS");
    add_graph(metrics);
    add_sessions(metrics);
    bind(metrics, cmd_metrics);

    auto* pif = app.add_subcommand("pif", "PIF classifier");
    pif->require_subcommand(1);
    auto* pif_train = pif->add_subcommand("train", "Train on path_id,vd,sid,is,label rows");
    pif_train->add_option("--data", in.data, "Training CSV");
    pif_train->add_option("--model", in.model, "Model file to write");
    bind(pif_train, cmd_pif_train);
    auto* pif_cv = pif->add_subcommand("cv", "Stratified k-fold cross-validation");
    pif_cv->add_option("--data", in.data, "Training CSV");
    bind(pif_cv, cmd_pif_cv);
    auto* pif_predict = pif->add_subcommand("predict", "Predict PIF labels for feature rows");
    pif_predict->add_option("--model", in.model, "Model file");
    pif_predict->add_option("--features", in.features, "CSV path_id,vd,sid,is")->required()->check(CLI::ExistingFile);
    bind(pif_predict, cmd_pif_predict);

    auto* report = app.add_subcommand("report", "Run the full pipeline and write the risk report");
    add_graph(report);
    add_sessions(report);
    report->add_option("--model", in.model, "Trained model (otherwise trained from --data)");
    report->add_option("--data", in.data, "Training CSV");
    bind(report, cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        return handler ? handler(g, in) : kExitFatal;
    } catch (const GraphError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFatal;
    }
}
