#pragma once

#include <filesystem>
#include <string>

#include "evogrid/cmaes.hpp"
#include "evogrid/evdn.hpp"
#include "evogrid/kinrew.hpp"
#include "evogrid/world.hpp"

namespace evogrid::config {

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir;
    world::WorldConfig world;
    kinrew::RewardConfig reward;
    evdn::TrainerConfig trainer;
    cmaes::CmaesConfig cmaes;

    /// Sorted-key JSON dump; the basis of the config hash embedded in every
    /// artifact.
    std::string canonical_json() const;
    std::string config_hash() const;
};

/// Parses and validates a run config. Unknown keys, wrong types, and
/// constraint violations raise ConfigError with a line-precise location.
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

} // namespace evogrid::config
