#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "evogrid/genome.hpp"
#include "evogrid/rng.hpp"

namespace evogrid::world {

using AgentId = std::int64_t;
constexpr AgentId kNoAgent = -1;

enum class TileKind : std::uint8_t { Dirt = 0, FoodSource = 1 };

struct Tile {
    TileKind kind = TileKind::Dirt;
    double food = 0.0;
    AgentId occupant = kNoAgent;

    bool occupied() const { return occupant != kNoAgent; }
};

struct AgentState {
    AgentId id = kNoAgent;
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t health = 0;
    std::int32_t age = 0;
    double food_stored = 0.0;
    Genome genome;
    std::int32_t policy_slot = 0;
    bool alive = true; // corpses are compacted at the end of each tick
};

enum class MoveDir : std::uint8_t { Stay = 0, North, East, South, West };

/// One of the 10 joint actions: 5 moves x attack on/off.
/// Index encoding: move for [0,5), move+attack for [5,10).
struct Action {
    MoveDir move = MoveDir::Stay;
    bool attack = false;

    int index() const { return static_cast<int>(move) + (attack ? 5 : 0); }
    static Action from_index(int idx) {
        return Action{static_cast<MoveDir>(idx % 5), idx >= 5};
    }
};

constexpr int kActionCount = 10;

struct FoodLayout {
    enum class Kind : std::uint8_t { UniformRandom = 0, All = 1, None = 2 };
    Kind kind = Kind::UniformRandom;
    double density = 0.25; // fraction of tiles that are sources (UniformRandom)
};

enum class Reproduction : std::uint8_t { Asexual = 0, Sexual = 1 };

struct WorldConfig {
    std::int32_t width = 50;
    std::int32_t height = 50;
    double endowment = 10.0;       // e: food transferred to a newborn
    std::int32_t initial_health = 2;
    std::int32_t fertility_start = 5;  // inclusive age window
    std::int32_t fertility_end = 40;
    std::int32_t longevity = 50;       // agents die when age exceeds this
    double food_growth_rate = 0.15;    // f_r per source tile per tick
    double food_capacity = 3.0;        // c_f
    std::int32_t genome_length = 1;    // N: 1 asexual, 32 sexual
    Reproduction reproduction = Reproduction::Asexual;
    std::int32_t founder_count = 5;
    FoodLayout food_layout{};
    std::uint64_t seed = 0;

    // Observation options.
    bool mask_kinship = false;     // zero the kinship channel (drift experiment)
    double count_soft_cap = 100.0; // scaling divisor for family/population counts

    // Experiment mask: voids attacks between identical-genome agents of this
    // founder family. Victim selection still consumes the same random draws.
    std::optional<std::uint32_t> blocked_family;

    void validate() const; // throws ConfigError
};

struct TickEvents {
    std::int64_t tick = 0;

    struct Birth {
        AgentId child = kNoAgent;
        AgentId parent_a = kNoAgent;
        AgentId parent_b = kNoAgent; // kNoAgent for asexual births
        std::int32_t x = 0, y = 0;
    };
    enum class DeathCause : std::uint8_t { Starvation = 0, OldAge = 1, Attack = 2 };
    struct Death {
        AgentId id = kNoAgent;
        DeathCause cause = DeathCause::Starvation;
        std::int32_t age = 0;
        std::uint32_t family = 0;  // first allele
        double food_lost = 0.0;    // corpse food removed from the world
    };
    struct AttackEvent {
        AgentId attacker = kNoAgent;
        AgentId victim = kNoAgent;
        bool lethal = false;
        bool blocked = false;        // voided by the intra-family mask
        double kinship = 0.0;        // attacker-victim kinship
        std::uint32_t attacker_family = 0; // attacker's first allele
        std::int32_t attacker_age = 0;
        std::int32_t victim_age = 0;
        double food_transferred = 0.0;
    };
    struct Harvest {
        AgentId id = kNoAgent;
        double amount = 0.0;
        Genome genome; // harvester may be dead by end of tick; keep its genome
    };

    std::vector<Birth> births;
    std::vector<Death> deaths;
    std::vector<AttackEvent> attacks;
    std::vector<Harvest> harvests;

    // Food ledger for the conservation invariant.
    double food_grown = 0.0;
    double food_eaten = 0.0;     // consumed by metabolism (capped at stores)
    double food_destroyed = 0.0; // corpses: 100% starvation/old-age, 50% of kills
};

/// Per-agent policy input: a 5x5 toroidal crop with 6 channels per tile
/// (food, occupied, age, food stored, kinship with observer, health), plus
/// 4 global scalars (x, y, family size n_i, total living agents). All values
/// scaled to O(1) ranges.
struct Observation {
    static constexpr int kGrid = 5;
    static constexpr int kChannels = 6;
    static constexpr int kScalarCount = 4;
    static constexpr int kGridSize = kGrid * kGrid * kChannels; // 150
    static constexpr int kSize = kGridSize + kScalarCount;      // 154

    std::array<double, kSize> data{};
};

using ActionMap = std::unordered_map<AgentId, Action>;

class World {
public:
    /// Initializes founders on distinct random unoccupied tiles, each with
    /// age 0, full health, food equal to the endowment and a unique genome
    /// (founder i: all alleles = i).
    explicit World(const WorldConfig& cfg);

    /// Assembles an explicit state for scripted scenarios and replays.
    /// `tiles` must be width*height in row-major order; occupancy is derived
    /// from `agents`.
    static World custom(const WorldConfig& cfg, std::vector<Tile> tiles,
                        std::vector<AgentState> agents, std::int64_t tick = 0);

    const WorldConfig& config() const { return cfg_; }
    std::int64_t tick() const { return tick_; }

    /// Living agents in ascending id order.
    const std::vector<AgentState>& agents() const { return agents_; }
    const AgentState* find(AgentId id) const;
    bool extinct() const { return agents_.empty(); }

    const Tile& tile_at(std::int32_t x, std::int32_t y) const {
        return grid_[static_cast<std::size_t>(y) * cfg_.width + x];
    }
    const std::vector<Tile>& grid() const { return grid_; }
    std::int32_t source_count() const { return static_cast<std::int32_t>(source_tiles_.size()); }

    /// Advances the world by one tick. `actions` must contain exactly one
    /// entry per living agent; anything else is a protocol error.
    ///
    /// Phase order per tick: per-agent (shuffled): move, harvest, reproduce,
    /// eat 1 food, age, starvation/old-age death; then attacks in the same
    /// shuffled order; then food growth on source tiles.
    TickEvents step(const ActionMap& actions);

    Observation observe(AgentId id) const; // throws on dead/unknown agent

    double total_tile_food() const;
    double total_agent_food() const;

    /// Re-labels policy slots through `map` (old slot -> new slot). Used right
    /// after init to apply a per-episode founder-to-policy assignment.
    void remap_policy_slots(std::span<const std::int32_t> map);

    /// Kinship-weighted family size of a living agent: sum of kinship with
    /// every living agent including itself.
    double family_weight(AgentId id) const;

    // Snapshot plumbing (io.cpp).
    const Rng& rng() const { return rng_; }
    Rng& mutable_rng() { return rng_; }
    AgentId next_agent_id() const { return next_id_; }
    void restore_counters(std::int64_t tick, AgentId next_id);

private:
    World() : rng_(0) {}

    std::size_t tile_index(std::int32_t x, std::int32_t y) const {
        return static_cast<std::size_t>(y) * cfg_.width + x;
    }
    std::int32_t wrap_x(std::int32_t x) const;
    std::int32_t wrap_y(std::int32_t y) const;
    AgentState* find_mutable(AgentId id);
    void place(AgentState agent);
    void kill(AgentState& agent, TickEvents::DeathCause cause, TickEvents& ev,
              double destroyed_fraction);
    bool fertile(const AgentState& a) const;
    void try_reproduce(AgentState& parent, TickEvents& ev,
                       std::vector<AgentId>& newborns,
                       std::vector<AgentId>& bred);
    void rebuild_sources();

    WorldConfig cfg_;
    std::int64_t tick_ = 0;
    std::vector<Tile> grid_;
    std::vector<AgentState> agents_; // sorted by id; compacted each tick
    std::vector<std::int32_t> source_tiles_;
    AgentId next_id_ = 0;
    Rng rng_;
};

/// Scripted or learned controller: maps a world state to one action per
/// living agent.
using PolicyFn = std::function<ActionMap(const World&)>;

/// Policy that keeps every agent still and never attacks.
ActionMap all_stay(const World& w);

/// Uniform-random action for every living agent, drawn from `rng`.
ActionMap random_actions(const World& w, Rng& rng);

} // namespace evogrid::world
