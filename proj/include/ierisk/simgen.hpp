#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ierisk/graph.hpp"
#include "ierisk/ingest.hpp"

namespace ierisk {

struct PathPlan {
    double median_s = 8.0;
    double sigma = 0.28;
    double p_execution = 0.0;
    double p_outcome = 0.0;

    friend bool operator==(const PathPlan&, const PathPlan&) = default;
};

struct ScenarioPlan {
    std::vector<Procedure> procedures;  // every step needs target_path
    std::map<std::string, PathPlan> paths;
    std::optional<PathPlan> default_path;  // for paths not listed
    std::size_t participants = 1;
    std::size_t sessions_per_participant = 1;
    std::uint64_t seed = 0;
};

struct SimOptions {
    std::size_t min_waypoints = 3;
    std::size_t max_waypoints = 8;
    double jitter_px = 10.0;
    std::int64_t min_gap_ms = 200;
    std::int64_t max_gap_ms = 800;
    int click_attempts = 8;
};

// Plan for `path_id`, falling back to the default. Throws InvalidArgument
// when neither exists.
const PathPlan& plan_for(const ScenarioPlan& plan, const std::string& path_id);

void validate_plan(const InterfaceGraph& g, const ScenarioPlan& plan);

// Each session runs every procedure in order. Session k of participant p
// uses the key derive(derive(seed, p), k).
std::vector<SessionLog> generate_sessions(const InterfaceGraph& g, const ScenarioPlan& plan,
                                          const SimOptions& options = {});

SessionLog generate_session(const InterfaceGraph& g, const ScenarioPlan& plan, std::size_t participant,
                            std::size_t session_index, const SimOptions& options = {});

// Step ids are "<procedure_id>/<step_id>".
StepTargets plan_step_targets(const ScenarioPlan& plan);

ScenarioPlan load_plan(const nlohmann::json& document);
ScenarioPlan load_plan_file(const std::filesystem::path& file);
nlohmann::json plan_to_json(const ScenarioPlan& plan);

// Writes `<session_id>.jsonl` per session; returns the written files.
std::vector<std::filesystem::path> write_sessions(const std::vector<SessionLog>& sessions,
                                                  const std::filesystem::path& directory);

} // namespace ierisk
