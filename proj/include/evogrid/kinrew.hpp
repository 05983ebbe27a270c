#pragma once

#include <cstdint>

#include "evogrid/genome.hpp"
#include "evogrid/world.hpp"

namespace evogrid::kinrew {

enum class RewardKind : std::uint8_t { Evolutionary = 0, Sugary = 1 };

struct RewardConfig {
    double gamma = 0.9;   // discount, in (0,1) for the horizon formula
    double epsilon = 0.1; // tolerated truncation error of the final reward
    double r_b = 0.0;     // upper bound on per-tick summed kinship; <= 0 derives
                          // it from the world (source tiles * growth rate)
    RewardKind kind = RewardKind::Evolutionary;
};

/// Max sustainable population: total food production per tick.
double carrying_capacity(const world::World& w);

double resolve_r_b(const RewardConfig& cfg, const world::World& w);

/// Per-tick reward of a living agent: its summed kinship with every living
/// agent (including itself), evaluated on the end-of-tick census.
double evolutionary_reward(const world::World& post_tick, world::AgentId id);
double evolutionary_reward(const world::World& post_tick, const Genome& g);

/// Denser proxy reward: kinship-weighted food harvested this tick. Only tile
/// harvest counts; food taken from attack victims does not.
double sugary_reward(const world::TickEvents& ev, const Genome& g);

/// Smallest horizon h_e with worst-case truncation error r_b*gamma^h/(1-gamma)
/// no larger than epsilon. Requires 0 < gamma < 1 and epsilon*(1-gamma)/r_b < 1.
int effective_horizon(const RewardConfig& cfg);

/// Ground-truth final reward of an agent that died at tick T-1: simulates the
/// given snapshot (the state at tick T) forward under `policies` and returns
/// the discounted kinship sums over `effective_horizon` ticks. The t'=0 term
/// is evaluated on the snapshot itself.
double terminal_reward_oracle(world::World snapshot, const Genome& g,
                              const world::PolicyFn& policies,
                              const RewardConfig& cfg);

} // namespace evogrid::kinrew
