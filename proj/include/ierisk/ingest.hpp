#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ierisk/graph.hpp"

namespace ierisk {

enum class EventKind { move, click, key, step_start, step_end, error_annotation };
enum class ErrorKind { execution, outcome };

std::string_view to_string(EventKind kind) noexcept;
std::string_view to_string(ErrorKind kind) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view text) noexcept;
std::optional<ErrorKind> parse_error_kind(std::string_view text) noexcept;

struct TrackerEvent {
    std::int64_t t_ms = 0;
    EventKind kind = EventKind::move;
    std::optional<Point> point;          // present iff move/click
    std::optional<std::string> screen;
    std::optional<std::string> step_id;
    std::optional<ErrorKind> error_kind; // present iff error_annotation

    friend bool operator==(const TrackerEvent&, const TrackerEvent&) = default;
};

struct SessionLog {
    std::string session_id;
    std::string participant_id;
    std::vector<TrackerEvent> events;

    friend bool operator==(const SessionLog&, const SessionLog&) = default;
};

struct AlignedStep {
    std::string step_id;
    std::string path_id;
    double duration_s = 0.0;
    std::vector<ErrorKind> errors;
    std::vector<Point> trajectory;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
};

struct AlignmentIssue {
    std::string step_id;
    std::string message;
};

struct AlignedTrace {
    std::string session_id;
    std::string participant_id;
    std::vector<AlignedStep> steps;
    std::vector<AlignmentIssue> unaligned;
    // move/click/error_annotation events outside every step window.
    std::size_t unattributed_events = 0;
};

struct ErrorCounts {
    std::size_t execution = 0;
    std::size_t outcome = 0;

    std::size_t total() const noexcept { return execution + outcome; }
    friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

struct PathSample {
    std::vector<double> durations;
    ErrorCounts error_counts;
    std::size_t attempts = 0;
};

using PathSamples = std::map<std::string, PathSample>;

struct ProcedureStep {
    std::string step_id;
    std::string text;
    std::optional<std::string> target_path;
};

struct Procedure {
    std::string procedure_id;
    std::vector<ProcedureStep> steps;
};

// Parses JSON Lines (one event per line; blank lines ignored). Throws
// ParseError carrying the 1-based line number of the offending line.
SessionLog parse_session_log(std::string_view document);
SessionLog read_session_log(const std::filesystem::path& file);
std::string serialize_session_log(const SessionLog& log);

struct HitTestOptions {
    double snap_radius_px = 12.0;
};

// Element under `point` on screen_id: smallest containing bbox, ties by id;
// otherwise the nearest center within the snap radius.
std::optional<std::string> hit_test(const InterfaceGraph& graph, std::string_view screen_id,
                                    Point point, const HitTestOptions& options = {});

// Declared target paths keyed by "<procedure_id>/<step_id>", and by the bare
// step_id when it is unique across all procedures.
using StepTargets = std::map<std::string, std::string>;
StepTargets step_targets(std::span<const Procedure> procedures);

AlignedTrace align_events(const InterfaceGraph& graph, const SessionLog& log,
                          const StepTargets& targets = {}, const HitTestOptions& options = {});

PathSamples path_samples(std::span<const AlignedTrace> traces);

std::vector<Procedure> load_procedures(const nlohmann::json& document);
std::vector<Procedure> load_procedures_file(const std::filesystem::path& file);
nlohmann::json procedures_to_json(std::span<const Procedure> procedures);

nlohmann::json trace_to_json(const AlignedTrace& trace);
AlignedTrace trace_from_json(const nlohmann::json& j);

} // namespace ierisk
