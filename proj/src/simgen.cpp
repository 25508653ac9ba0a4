#include "ierisk/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"
#include "ierisk/rng.hpp"

namespace ierisk {

namespace {

using nlohmann::json;

void check_path_plan(const std::string& where, const PathPlan& p) {
    if (!(p.median_s > 0.0) || !std::isfinite(p.median_s)) throw InvalidArgument(where + ": median must be positive");
    if (!(p.sigma >= 0.0) || !std::isfinite(p.sigma)) throw InvalidArgument(where + ": sigma must be non-negative");
    for (double pr : {p.p_execution, p.p_outcome}) {
        if (!(pr >= 0.0 && pr <= 1.0)) throw InvalidArgument(where + ": probability outside [0, 1]");
    }
}

struct Target {
    const InterfaceElement* element;
    const Screen* screen;
};

Target target_of(const InterfaceGraph& g, const std::string& path_id) {
    const auto* e = g.find(node_id_for(path_id));
    if (!e) throw InvalidArgument("plan references unknown path " + path_id);
    const auto* s = g.find_screen(e->screen_id);
    if (!s) throw GraphError(e->id, "element screen not found");
    return {e, s};
}

Point target_center(const InterfaceElement& e) { return e.bbox ? e.bbox->center() : e.position; }

Point clamp_to(const Screen& s, Point p) {
    return {std::clamp(p.x, 0.0, s.width_px), std::clamp(p.y, 0.0, s.height_px)};
}

Point choose_click(const InterfaceGraph& g, const Target& t, CounterRng& rng, const SimOptions& options) {
    const auto& e = *t.element;
    if (!e.bbox) return e.position;
    const BBox& b = *e.bbox;
    for (int i = 0; i < options.click_attempts; ++i) {
        const Point p{b.x + b.width * rng.uniform(0.1, 0.9), b.y + b.height * rng.uniform(0.1, 0.9)};
        if (hit_test(g, e.screen_id, p) == e.id) return p;
    }
    return b.center();
}

PathPlan path_plan_from_json(const json& j, const PathPlan& base) {
    PathPlan p = base;
    p.median_s = j.value("median_s", p.median_s);
    p.sigma = j.value("sigma", p.sigma);
    p.p_execution = j.value("p_execution", p.p_execution);
    p.p_outcome = j.value("p_outcome", p.p_outcome);
    return p;
}

json path_plan_to_json(const PathPlan& p) {
    return {{"median_s", p.median_s}, {"sigma", p.sigma}, {"p_execution", p.p_execution}, {"p_outcome", p.p_outcome}};
}

} // namespace

const PathPlan& plan_for(const ScenarioPlan& plan, const std::string& path_id) {
    if (auto it = plan.paths.find(path_id); it != plan.paths.end()) return it->second;
    if (plan.default_path) return *plan.default_path;
    throw InvalidArgument("no duration/error model for path " + path_id);
}

void validate_plan(const InterfaceGraph& g, const ScenarioPlan& plan) {
    for (const auto& [path, p] : plan.paths) {
        check_path_plan(path, p);
        target_of(g, path);
    }
    if (plan.default_path) check_path_plan("default", *plan.default_path);
    for (const auto& proc : plan.procedures) {
        for (const auto& step : proc.steps) {
            if (!step.target_path) {
                throw InvalidArgument("plan step " + proc.procedure_id + "/" + step.step_id + " has no target_path");
            }
            target_of(g, *step.target_path);
            resolve_path(g, *step.target_path);
            plan_for(plan, *step.target_path);
        }
    }
    if (plan.participants == 0 || plan.sessions_per_participant == 0) {
        throw InvalidArgument("plan needs at least one participant and one session");
    }
}

SessionLog generate_session(const InterfaceGraph& g, const ScenarioPlan& plan, std::size_t participant,
                            std::size_t session_index, const SimOptions& options) {
    if (options.min_waypoints == 0 || options.max_waypoints < options.min_waypoints) {
        throw InvalidArgument("invalid waypoint range");
    }
    CounterRng rng(CounterRng::derive(CounterRng::derive(plan.seed, participant), session_index));

    char buf[64];
    std::snprintf(buf, sizeof buf, "p%02zu", participant + 1);
    SessionLog log;
    log.participant_id = buf;
    std::snprintf(buf, sizeof buf, "p%02zu-s%03zu", participant + 1, session_index + 1);
    log.session_id = buf;

    std::int64_t t = 0;
    std::optional<Point> previous;
    for (const auto& proc : plan.procedures) {
        for (const auto& step : proc.steps) {
            const std::string& path = *step.target_path;
            const Target target = target_of(g, path);
            const PathPlan& pp = plan_for(plan, path);
            const std::string step_id = proc.procedure_id + "/" + step.step_id;
            const std::string& screen = target.element->screen_id;

            const double duration = std::exp(std::log(pp.median_s) + pp.sigma * rng.normal());
            const std::size_t waypoints =
                options.min_waypoints + rng.below(options.max_waypoints - options.min_waypoints + 1);
            const bool exec_error = rng.bernoulli(pp.p_execution);
            const bool outcome_error = rng.bernoulli(pp.p_outcome);

            const Point to = target_center(*target.element);
            const Point from = previous.value_or(Point{target.screen->width_px / 2.0, target.screen->height_px / 2.0});

            std::vector<TrackerEvent> inner;
            for (std::size_t i = 1; i <= waypoints; ++i) {
                const double f = static_cast<double>(i) / static_cast<double>(waypoints + 1);
                const double r = options.jitter_px * std::sqrt(rng.uniform());
                const double a = 2.0 * std::numbers::pi * rng.uniform();
                const Point p{from.x + f * (to.x - from.x) + r * std::cos(a), from.y + f * (to.y - from.y) + r * std::sin(a)};
                inner.push_back({0, EventKind::move, clamp_to(*target.screen, p), screen, std::nullopt, std::nullopt});
            }
            const Point click = choose_click(g, target, rng, options);
            inner.push_back({0, EventKind::click, click, screen, std::nullopt, std::nullopt});
            if (exec_error) inner.push_back({0, EventKind::error_annotation, std::nullopt, std::nullopt, step_id, ErrorKind::execution});
            if (outcome_error) inner.push_back({0, EventKind::error_annotation, std::nullopt, std::nullopt, step_id, ErrorKind::outcome});

            const auto slots = static_cast<std::int64_t>(inner.size());
            const std::int64_t duration_ms = std::max<std::int64_t>(std::llround(duration * 1000.0), slots + 1);

            log.events.push_back({t, EventKind::step_start, std::nullopt, screen, step_id, std::nullopt});
            for (std::int64_t k = 0; k < slots; ++k) {
                auto ev = inner[static_cast<std::size_t>(k)];
                ev.t_ms = t + (k + 1) * duration_ms / (slots + 1);
                log.events.push_back(std::move(ev));
            }
            t += duration_ms;
            log.events.push_back({t, EventKind::step_end, std::nullopt, screen, step_id, std::nullopt});
            t += options.min_gap_ms +
                 static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(options.max_gap_ms - options.min_gap_ms + 1)));
            previous = click;
        }
    }
    return log;
}

std::vector<SessionLog> generate_sessions(const InterfaceGraph& g, const ScenarioPlan& plan,
                                          const SimOptions& options) {
    validate_plan(g, plan);
    std::vector<SessionLog> out;
    out.reserve(plan.participants * plan.sessions_per_participant);
    for (std::size_t p = 0; p < plan.participants; ++p) {
        for (std::size_t s = 0; s < plan.sessions_per_participant; ++s) {
            out.push_back(generate_session(g, plan, p, s, options));
        }
    }
    return out;
}

StepTargets plan_step_targets(const ScenarioPlan& plan) {
    StepTargets out;
    for (const auto& proc : plan.procedures) {
        for (const auto& step : proc.steps) {
            if (step.target_path) out[proc.procedure_id + "/" + step.step_id] = *step.target_path;
        }
    }
    return out;
}

ScenarioPlan load_plan(const json& j) {
    try {
        ScenarioPlan plan;
        plan.seed = j.value("seed", std::uint64_t{0});
        plan.participants = j.value("participants", std::size_t{1});
        plan.sessions_per_participant = j.value("sessions_per_participant", std::size_t{1});
        plan.procedures = load_procedures(j.at("procedures"));
        if (auto d = j.find("default_path"); d != j.end() && !d->is_null()) {
            plan.default_path = path_plan_from_json(*d, PathPlan{});
        }
        const PathPlan base = plan.default_path.value_or(PathPlan{});
        if (auto p = j.find("paths"); p != j.end()) {
            for (const auto& [id, spec] : p->items()) plan.paths[id] = path_plan_from_json(spec, base);
        }
        return plan;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed scenario plan: ") + e.what());
    }
}

ScenarioPlan load_plan_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open plan " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("plan is not valid JSON: ") + e.what());
    }
    return load_plan(j);
}

json plan_to_json(const ScenarioPlan& plan) {
    json j;
    j["seed"] = plan.seed;
    j["participants"] = plan.participants;
    j["sessions_per_participant"] = plan.sessions_per_participant;
    j["procedures"] = procedures_to_json(plan.procedures);
    if (plan.default_path) j["default_path"] = path_plan_to_json(*plan.default_path);
    json paths = json::object();
    for (const auto& [id, p] : plan.paths) paths[id] = path_plan_to_json(p);
    j["paths"] = paths;
    return j;
}

std::vector<std::filesystem::path> write_sessions(const std::vector<SessionLog>& sessions,
                                                  const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    std::vector<std::filesystem::path> files;
    for (const auto& s : sessions) {
        auto file = directory / (s.session_id + ".jsonl");
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + file.string());
        out << serialize_session_log(s);
        files.push_back(std::move(file));
    }
    return files;
}

} // namespace ierisk
