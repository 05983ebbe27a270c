#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evogrid/io.hpp"
#include "evogrid/neural.hpp"
#include "evogrid/world.hpp"

namespace evogrid::analytics {

/// Shannon entropy (base 2) of the allele-frequency distribution pooled over
/// every genome position of every living agent. Errors on an empty census.
double allele_entropy(const world::World& w);

/// Per-founder family weight: in asexual worlds the plain head count of
/// agents carrying the founder's allele; in sexual worlds each agent
/// contributes the fraction of its genome positions carrying it.
std::vector<double> family_sizes(const world::World& w, int founder_count);

struct TickMetrics {
    std::int64_t tick = 0;
    int population = 0;
    int births = 0;
    int deaths_starvation = 0;
    int deaths_age = 0;
    int deaths_attack = 0;
    int attacks_intra = 0;   // kinship 1 (executed, not blocked)
    int attacks_inter = 0;
    int attacks_blocked = 0;
    double mean_lifespan_dying = 0.0; // over this tick's deaths; 0 when none
    double mean_cannibal_age = 0.0;   // intra-family lethal attacks; 0 when none
    double mean_victim_age = 0.0;
    std::vector<double> family; // per-founder sizes
    double entropy = 0.0;       // valid only when population > 0
};

TickMetrics collect_tick_metrics(const world::World& post_tick,
                                 const world::TickEvents& ev, int founder_count);

// ---- Episode machinery -----------------------------------------------------

struct EpisodeSpec {
    world::WorldConfig wcfg;              // seed is overwritten per episode
    std::vector<std::int32_t> assignment; // founder -> net index
    double epsilon = 0.0;                 // 1.0 = uniform-random actions
    int length = 500;
    std::uint64_t seed = 0;
    bool record = false;
};

struct EpisodeData {
    std::vector<int> population;               // length+1 entries, initial census first
    std::vector<std::vector<double>> family;   // [tick][founder]
    std::vector<double> entropy;               // aligned with population; NaN once extinct
    int births = 0;
    int deaths_starvation = 0, deaths_age = 0, deaths_attack = 0;
    int attacks_intra = 0, attacks_inter = 0, attacks_blocked = 0;
    int intra_attacks_on_family = -1; // executed kin-1 attacks within the target family
    double mean_lifespan = 0.0;       // mean age at death; 0 when nothing died
    double mean_population = 0.0;     // time average over post-step censuses
    bool survived = false;
    std::uint64_t seed = 0;
    io::EpisodeLog log;
};

/// Runs one seeded episode under epsilon-greedy control of `nets` (empty pool
/// allowed when epsilon = 1). `track_family` (allele) enables the
/// intra_attacks_on_family counter.
EpisodeData run_episode(const EpisodeSpec& spec,
                        std::span<const neural::QNetwork* const> nets,
                        std::int64_t track_family = -1);

// ---- Aggregation ------------------------------------------------------------

struct Ci {
    double mean = 0.0;
    double half_width = 0.0; // 95%, normal approximation over episode means
    int n = 0;
};

Ci normal_ci(std::span<const double> xs);

struct PairedTest {
    double z = 0.0;
    bool significant = false; // two-sided, alpha = 0.05
};

PairedTest paired_z_test(std::span<const double> a, std::span<const double> b);

struct EvalConfig {
    int episodes = 20;
    int length = 500;
    double epsilon = 0.0;
    int threads = 0;
    bool record = false;
};

struct EvalSummary {
    std::vector<EpisodeData> data;
    std::vector<std::uint64_t> seeds;
    Ci mean_population;
    Ci final_population;
    Ci births;
    double survival_rate = 0.0;
    std::vector<double> mean_pop_series; // per tick, averaged over episodes
};

/// Seeded greedy evaluation episodes with the identity policy assignment
/// (founder f -> net f; a single-net pool maps every founder to it).
EvalSummary evaluate(const world::WorldConfig& wcfg,
                     std::span<const neural::QNetwork* const> nets,
                     const EvalConfig& cfg, std::uint64_t base_seed);

struct HeadToHeadRow {
    int episode = 0;
    int tick = 0;
    int family = 0;
    double size = 0.0;
};

struct HeadToHeadResult {
    std::vector<HeadToHeadRow> rows;
    std::vector<double> pool_a_final; // per episode: families 0+1
    std::vector<double> pool_b_final; // per episode: families 2+3
    PairedTest final_gap;
    std::vector<std::uint64_t> seeds;
};

/// Four founders in one asexual world: families 0-1 play pool A's two nets,
/// families 2-3 pool B's.
HeadToHeadResult head_to_head(const world::WorldConfig& wcfg,
                              std::span<const neural::QNetwork* const> nets4,
                              int episodes, int length, std::uint64_t seed,
                              int threads = 0);

struct AblationRow {
    int arm = 0; // 0 = attacks allowed, 1 = intra-family attacks voided
    int episode = 0;
    int tick = 0;
    double family_size = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::int64_t masked_arm_intra_attacks = 0;  // executed; must stay 0
    std::int64_t masked_arm_blocked_events = 0;
    Ci final_masked;
    Ci final_unmasked;
    std::vector<std::uint64_t> seeds;
};

/// Paired seeded runs with and without the world-level mask that voids
/// attacks between identical-genome members of `family`.
AblationResult ablate_intra_family_attacks(const world::WorldConfig& wcfg,
                                           std::span<const neural::QNetwork* const> nets,
                                           std::uint32_t family, int episodes, int length,
                                           std::uint64_t seed, int threads = 0);

struct DriftRow {
    int arm = 0; // 0 = kinship visible, 1 = kinship channel zeroed
    int episode = 0;
    int tick = 0;
    double entropy = 0.0;
};

struct DriftResult {
    std::vector<DriftRow> rows;
    std::vector<std::uint64_t> seeds;
};

DriftResult kin_masking_drift(const world::WorldConfig& wcfg,
                              std::span<const neural::QNetwork* const> nets,
                              int episodes, int length, std::uint64_t seed,
                              int threads = 0);

struct RandomDriftOutcome {
    double entropy_at_start = 0.0;
    bool reached_zero_entropy = false;
    bool extinct = false;
    std::int64_t ticks = 0;
};

/// Uniform-random actions until fixation (entropy 0 with survivors),
/// extinction, or the tick cap.
RandomDriftOutcome run_random_drift_episode(const world::WorldConfig& wcfg,
                                            std::uint64_t seed, std::int64_t max_ticks);

// ---- Artifact output --------------------------------------------------------

void write_eval_ticks_csv(const std::filesystem::path& path, const EvalSummary& s,
                          const std::string& config_hash, std::uint64_t seed);
void write_eval_episodes_csv(const std::filesystem::path& path, const EvalSummary& s,
                             const std::string& config_hash, std::uint64_t seed);
void write_headtohead_csv(const std::filesystem::path& path, const HeadToHeadResult& r,
                          const std::string& config_hash, std::uint64_t seed);
void write_ablation_csv(const std::filesystem::path& path, const AblationResult& r,
                        const std::string& config_hash, std::uint64_t seed);
void write_drift_csv(const std::filesystem::path& path, const DriftResult& r,
                     const std::string& config_hash, std::uint64_t seed);

} // namespace evogrid::analytics
