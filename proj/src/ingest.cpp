#include "ierisk/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ierisk/error.hpp"

namespace ierisk {

using nlohmann::json;

namespace {

constexpr std::string_view kEventNames[] = {"move",     "click",    "key",
                                            "step_start", "step_end", "error_annotation"};
constexpr std::string_view kErrorNames[] = {"execution", "outcome"};

bool has_point(EventKind k) { return k == EventKind::move || k == EventKind::click; }

std::optional<std::string> optional_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(line, std::string("malformed line: '") + key + "' must be a string");
    return it->get<std::string>();
}

std::optional<std::string> hit_among(const std::vector<const InterfaceElement*>& candidates, Point p,
                                     const HitTestOptions& options) {
    const InterfaceElement* best = nullptr;
    for (const auto* e : candidates) {
        if (!e->bbox || !e->bbox->contains(p)) continue;
        if (!best || e->bbox->area() < best->bbox->area() ||
            (e->bbox->area() == best->bbox->area() && e->id < best->id)) {
            best = e;
        }
    }
    if (best) return best->id;

    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto* e : candidates) {
        const double d = std::hypot(e->position.x - p.x, e->position.y - p.y);
        if (d > options.snap_radius_px) continue;
        if (d < best_dist || (d == best_dist && best && e->id < best->id)) {
            best = e;
            best_dist = d;
        }
    }
    if (best) return best->id;
    return std::nullopt;
}

} // namespace

std::string_view to_string(EventKind kind) noexcept { return kEventNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(ErrorKind kind) noexcept { return kErrorNames[static_cast<std::size_t>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) noexcept {
    for (std::size_t i = 0; i < std::size(kEventNames); ++i) {
        if (kEventNames[i] == text) return static_cast<EventKind>(i);
    }
    return std::nullopt;
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) noexcept {
    for (std::size_t i = 0; i < std::size(kErrorNames); ++i) {
        if (kErrorNames[i] == text) return static_cast<ErrorKind>(i);
    }
    return std::nullopt;
}

SessionLog parse_session_log(std::string_view document) {
    SessionLog log;
    bool have_ids = false;
    std::vector<std::pair<std::string, std::size_t>> open;  // step id, line of step_start
    std::size_t line_no = 0;
    std::size_t pos = 0;

    while (pos <= document.size()) {
        auto nl = document.find('\n', pos);
        if (nl == std::string_view::npos) nl = document.size();
        std::string_view line = document.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (nl == document.size()) break;
            continue;
        }

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed line: ") + e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "malformed line: event must be a JSON object");

        const auto session = optional_string(j, "session_id", line_no);
        const auto participant = optional_string(j, "participant_id", line_no);
        if (!session || !participant) {
            throw ParseError(line_no, "malformed line: session_id and participant_id are required");
        }
        if (!have_ids) {
            log.session_id = *session;
            log.participant_id = *participant;
            have_ids = true;
        } else if (*session != log.session_id || *participant != log.participant_id) {
            throw ParseError(line_no, "session_id/participant_id differ from the first event");
        }

        TrackerEvent ev;
        auto t = j.find("t_ms");
        if (t == j.end() || !t->is_number()) throw ParseError(line_no, "malformed line: t_ms missing");
        if (t->is_number_integer()) {
            ev.t_ms = t->get<std::int64_t>();
        } else {
            const double d = t->get<double>();
            if (!std::isfinite(d) || d != std::floor(d)) {
                throw ParseError(line_no, "malformed line: t_ms must be an integer");
            }
            ev.t_ms = static_cast<std::int64_t>(d);
        }
        if (ev.t_ms < 0) throw ParseError(line_no, "negative timestamp");

        const auto kind_text = optional_string(j, "kind", line_no);
        const auto kind = kind_text ? parse_event_kind(*kind_text) : std::nullopt;
        if (!kind) throw ParseError(line_no, "malformed line: unknown event kind");
        ev.kind = *kind;

        const bool hx = j.contains("x") && !j["x"].is_null();
        const bool hy = j.contains("y") && !j["y"].is_null();
        if (has_point(ev.kind)) {
            if (!hx || !hy || !j["x"].is_number() || !j["y"].is_number()) {
                throw ParseError(line_no, "malformed line: move/click requires numeric x and y");
            }
            ev.point = Point{j["x"].get<double>(), j["y"].get<double>()};
            if (!std::isfinite(ev.point->x) || !std::isfinite(ev.point->y)) {
                throw ParseError(line_no, "malformed line: coordinates must be finite");
            }
        } else if (hx || hy) {
            throw ParseError(line_no, "malformed line: only move/click events carry coordinates");
        }

        ev.screen = optional_string(j, "screen", line_no);
        ev.step_id = optional_string(j, "step_id", line_no);
        const auto err_text = optional_string(j, "error_kind", line_no);
        if (ev.kind == EventKind::error_annotation) {
            if (!err_text) throw ParseError(line_no, "malformed line: error_annotation requires error_kind");
            ev.error_kind = parse_error_kind(*err_text);
            if (!ev.error_kind) throw ParseError(line_no, "malformed line: unknown error_kind");
        } else if (err_text) {
            throw ParseError(line_no, "malformed line: error_kind only allowed on error_annotation");
        }

        if (!log.events.empty() && ev.t_ms < log.events.back().t_ms) {
            throw ParseError(line_no, "non-monotonic timestamp");
        }

        if (ev.kind == EventKind::step_start || ev.kind == EventKind::step_end) {
            if (!ev.step_id || ev.step_id->empty()) {
                throw ParseError(line_no, "malformed line: step events require step_id");
            }
        }
        if (ev.kind == EventKind::step_start) {
            const bool already = std::any_of(open.begin(), open.end(),
                                             [&](const auto& o) { return o.first == *ev.step_id; });
            if (already) throw ParseError(line_no, "step_start for already open step " + *ev.step_id);
            open.emplace_back(*ev.step_id, line_no);
        } else if (ev.kind == EventKind::step_end) {
            if (open.empty() || open.back().first != *ev.step_id) {
                throw ParseError(line_no, "unmatched step_end for step " + *ev.step_id);
            }
            open.pop_back();
        }

        log.events.push_back(std::move(ev));
        if (nl == document.size()) break;
    }

    if (!open.empty()) throw ParseError(open.back().second, "unterminated step " + open.back().first);
    if (!have_ids) throw ParseError(0, "empty session log");
    return log;
}

SessionLog read_session_log(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open session log " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_session_log(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(e.line(), file.string() + ": " + e.what());
    }
}

std::string serialize_session_log(const SessionLog& log) {
    std::string out;
    for (const auto& ev : log.events) {
        json j{{"t_ms", ev.t_ms},
               {"kind", to_string(ev.kind)},
               {"session_id", log.session_id},
               {"participant_id", log.participant_id}};
        if (ev.point) {
            j["x"] = ev.point->x;
            j["y"] = ev.point->y;
        }
        if (ev.screen) j["screen"] = *ev.screen;
        if (ev.step_id) j["step_id"] = *ev.step_id;
        if (ev.error_kind) j["error_kind"] = to_string(*ev.error_kind);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::optional<std::string> hit_test(const InterfaceGraph& g, std::string_view screen_id, Point p,
                                    const HitTestOptions& options) {
    if (!g.find_screen(screen_id)) throw GraphError(std::string(screen_id), "unknown screen_id");
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidArgument("hit_test point must be finite");
    return hit_among(g.on_screen(screen_id), p, options);
}

StepTargets step_targets(std::span<const Procedure> procedures) {
    StepTargets out;
    std::map<std::string, std::size_t> bare_uses;
    for (const auto& proc : procedures) {
        for (const auto& step : proc.steps) ++bare_uses[step.step_id];
    }
    for (const auto& proc : procedures) {
        for (const auto& step : proc.steps) {
            if (!step.target_path) continue;
            out[proc.procedure_id + "/" + step.step_id] = *step.target_path;
            if (bare_uses[step.step_id] == 1) out[step.step_id] = *step.target_path;
        }
    }
    return out;
}

AlignedTrace align_events(const InterfaceGraph& g, const SessionLog& log, const StepTargets& targets,
                          const HitTestOptions& options) {
    struct Frame {
        std::string step_id;
        std::int64_t start_ms;
        std::optional<std::string> last_hit;
        bool any_click = false;
        std::vector<ErrorKind> errors;
        std::vector<Point> trajectory;
    };

    std::vector<const InterfaceElement*> all_elements;
    for (const auto& e : g.elements()) all_elements.push_back(&e);

    AlignedTrace trace;
    trace.session_id = log.session_id;
    trace.participant_id = log.participant_id;
    std::vector<Frame> open;

    for (const auto& ev : log.events) {
        switch (ev.kind) {
        case EventKind::step_start:
            open.push_back({*ev.step_id, ev.t_ms, std::nullopt, false, {}, {}});
            break;
        case EventKind::move:
        case EventKind::click:
            if (open.empty()) {
                ++trace.unattributed_events;
                break;
            }
            open.back().trajectory.push_back(*ev.point);
            if (ev.kind == EventKind::click) {
                open.back().any_click = true;
                std::optional<std::string> hit;
                if (ev.screen) {
                    hit = g.find_screen(*ev.screen) ? hit_among(g.on_screen(*ev.screen), *ev.point, options)
                                                    : std::nullopt;
                } else {
                    hit = hit_among(all_elements, *ev.point, options);
                }
                if (hit) open.back().last_hit = std::move(hit);
            }
            break;
        case EventKind::error_annotation: {
            if (open.empty()) {
                ++trace.unattributed_events;
                break;
            }
            Frame* target = &open.back();
            if (ev.step_id) {
                for (auto& f : open) {
                    if (f.step_id == *ev.step_id) target = &f;
                }
            }
            target->errors.push_back(*ev.error_kind);
            break;
        }
        case EventKind::step_end: {
            if (open.empty() || open.back().step_id != ev.step_id.value_or("")) {
                throw InvalidArgument("unmatched step_end in session " + log.session_id);
            }
            Frame f = std::move(open.back());
            open.pop_back();

            std::optional<std::string> path;
            if (auto it = targets.find(f.step_id); it != targets.end()) {
                if (!g.find(node_id_for(it->second))) {
                    trace.unaligned.push_back({f.step_id, "declared target " + it->second + " not in graph"});
                    break;
                }
                path = it->second;
            } else if (f.last_hit) {
                path = path_id_for(*f.last_hit);
            }
            if (!path) {
                trace.unaligned.push_back(
                    {f.step_id, f.any_click ? "unaligned step: no click resolved to an element"
                                            : "unaligned step: no clicks and no declared target"});
                break;
            }
            AlignedStep step;
            step.step_id = f.step_id;
            step.path_id = *path;
            step.start_ms = f.start_ms;
            step.end_ms = ev.t_ms;
            step.duration_s = static_cast<double>(ev.t_ms - f.start_ms) / 1000.0;
            step.errors = std::move(f.errors);
            step.trajectory = std::move(f.trajectory);
            trace.steps.push_back(std::move(step));
            break;
        }
        case EventKind::key:
            break;
        }
    }
    if (!open.empty()) throw InvalidArgument("unterminated step in session " + log.session_id);

    std::stable_sort(trace.steps.begin(), trace.steps.end(),
                     [](const AlignedStep& a, const AlignedStep& b) { return a.start_ms < b.start_ms; });
    return trace;
}

PathSamples path_samples(std::span<const AlignedTrace> traces) {
    PathSamples out;
    for (const auto& trace : traces) {
        for (const auto& step : trace.steps) {
            auto& s = out[step.path_id];
            s.durations.push_back(step.duration_s);
            ++s.attempts;
            for (auto e : step.errors) {
                if (e == ErrorKind::execution) ++s.error_counts.execution;
                else ++s.error_counts.outcome;
            }
        }
    }
    return out;
}

namespace {

Procedure procedure_from_json(const json& j) {
    if (!j.is_object()) throw ParseError(0, "procedure must be an object");
    Procedure p;
    p.procedure_id = j.at("procedure_id").get<std::string>();
    for (const auto& s : j.at("steps")) {
        ProcedureStep step;
        step.step_id = s.at("step_id").get<std::string>();
        step.text = s.value("text", "");
        if (auto t = s.find("target_path"); t != s.end() && !t->is_null()) step.target_path = t->get<std::string>();
        p.steps.push_back(std::move(step));
    }
    return p;
}

} // namespace

std::vector<Procedure> load_procedures(const json& doc) {
    std::vector<Procedure> out;
    try {
        if (doc.is_array()) {
            for (const auto& p : doc) out.push_back(procedure_from_json(p));
        } else if (doc.is_object() && doc.contains("procedures")) {
            for (const auto& p : doc.at("procedures")) out.push_back(procedure_from_json(p));
        } else {
            out.push_back(procedure_from_json(doc));
        }
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed procedures document: ") + e.what());
    }
    for (const auto& p : out) {
        std::set<std::string> seen;
        for (const auto& s : p.steps) {
            if (!seen.insert(s.step_id).second) {
                throw ParseError(0, "duplicate step_id " + s.step_id + " in " + p.procedure_id);
            }
        }
    }
    return out;
}

std::vector<Procedure> load_procedures_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open procedures file " + file.string());
    try {
        return load_procedures(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError(0, file.string() + ": " + e.what());
    }
}

json procedures_to_json(std::span<const Procedure> procedures) {
    json arr = json::array();
    for (const auto& p : procedures) {
        json steps = json::array();
        for (const auto& s : p.steps) {
            json js{{"step_id", s.step_id}, {"text", s.text}};
            if (s.target_path) js["target_path"] = *s.target_path;
            steps.push_back(std::move(js));
        }
        arr.push_back({{"procedure_id", p.procedure_id}, {"steps", std::move(steps)}});
    }
    return arr;
}

json trace_to_json(const AlignedTrace& trace) {
    json steps = json::array();
    for (const auto& s : trace.steps) {
        json errors = json::array();
        for (auto e : s.errors) errors.push_back(to_string(e));
        json traj = json::array();
        for (auto p : s.trajectory) traj.push_back({p.x, p.y});
        steps.push_back({{"step_id", s.step_id},
                         {"path_id", s.path_id},
                         {"duration_s", s.duration_s},
                         {"start_ms", s.start_ms},
                         {"end_ms", s.end_ms},
                         {"errors", std::move(errors)},
                         {"trajectory", std::move(traj)}});
    }
    json issues = json::array();
    for (const auto& u : trace.unaligned) issues.push_back({{"step_id", u.step_id}, {"message", u.message}});
    return {{"session_id", trace.session_id},
            {"participant_id", trace.participant_id},
            {"steps", std::move(steps)},
            {"unaligned", std::move(issues)},
            {"unattributed_events", trace.unattributed_events}};
}

AlignedTrace trace_from_json(const json& j) {
    AlignedTrace t;
    try {
        t.session_id = j.at("session_id").get<std::string>();
        t.participant_id = j.at("participant_id").get<std::string>();
        for (const auto& s : j.at("steps")) {
            AlignedStep step;
            step.step_id = s.at("step_id").get<std::string>();
            step.path_id = s.at("path_id").get<std::string>();
            step.duration_s = s.at("duration_s").get<double>();
            step.start_ms = s.value("start_ms", std::int64_t{0});
            step.end_ms = s.value("end_ms", std::int64_t{0});
            for (const auto& e : s.at("errors")) {
                auto k = parse_error_kind(e.get<std::string>());
                if (!k) throw ParseError(0, "unknown error kind in trace");
                step.errors.push_back(*k);
            }
            for (const auto& p : s.at("trajectory")) step.trajectory.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            t.steps.push_back(std::move(step));
        }
        t.unattributed_events = j.value("unattributed_events", std::size_t{0});
        if (auto u = j.find("unaligned"); u != j.end()) {
            for (const auto& i : *u) t.unaligned.push_back({i.at("step_id").get<std::string>(), i.at("message").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("malformed trace: ") + e.what());
    }
    return t;
}

} // namespace ierisk
