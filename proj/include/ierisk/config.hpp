#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ierisk/metrics.hpp"
#include "ierisk/pifnet.hpp"
#include "ierisk/riskpath.hpp"

namespace ierisk {

inline constexpr const char* kToolVersion = "0.1.0";

struct EmbedConfig {
    std::string provider = "local";  // "local" or "remote"
    std::string model = "text-embedding-ada-002";
    std::string endpoint;
    int timeout_ms = 10000;
    std::optional<std::string> cache_dir;

    friend bool operator==(const EmbedConfig&, const EmbedConfig&) = default;
};

struct ToolConfig {
    // Input locations by role: graph, procedures, sessions, t95, training, model.
    std::map<std::string, std::string> paths;
    EmbedConfig embed;
    TimeDeviationOptions time;
    ErrorPathOptions errors;
    MetricsConfig metrics;
    TrainHyper pif_hyper;
    std::uint64_t pif_seed = 0;
    std::size_t cv_folds = 5;
    std::set<std::string> conflict_set;  // empty: labels with a table weight >= 3
};

ToolConfig load_config(const nlohmann::json& document);
ToolConfig load_config_file(const std::filesystem::path& file);
nlohmann::json config_to_json(const ToolConfig& config);

// Hex SHA-256 of the canonical (sorted-key, compact) config JSON.
std::string config_fingerprint(const ToolConfig& config);

} // namespace ierisk
