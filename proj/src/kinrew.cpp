#include "evogrid/kinrew.hpp"

#include <cmath>
#include <stdexcept>

namespace evogrid::kinrew {

double carrying_capacity(const world::World& w) {
    return w.source_count() * w.config().food_growth_rate;
}

double resolve_r_b(const RewardConfig& cfg, const world::World& w) {
    return cfg.r_b > 0.0 ? cfg.r_b : carrying_capacity(w);
}

double evolutionary_reward(const world::World& post_tick, world::AgentId id) {
    const world::AgentState* a = post_tick.find(id);
    if (!a)
        throw std::domain_error("evolutionary_reward: agent is dead; use the terminal path");
    return evolutionary_reward(post_tick, a->genome);
}

double evolutionary_reward(const world::World& post_tick, const Genome& g) {
    double r = 0.0;
    for (const auto& other : post_tick.agents()) r += kinship(g, other.genome);
    return r;
}

double sugary_reward(const world::TickEvents& ev, const Genome& g) {
    double r = 0.0;
    for (const auto& h : ev.harvests) r += kinship(g, h.genome) * h.amount;
    return r;
}

int effective_horizon(const RewardConfig& cfg) {
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
        throw std::domain_error("effective_horizon: gamma must be in (0,1)");
    if (!(cfg.epsilon > 0.0) || !(cfg.r_b > 0.0))
        throw std::domain_error("effective_horizon: epsilon and r_b must be positive");
    const double x = cfg.epsilon * (1.0 - cfg.gamma) / cfg.r_b;
    if (!(x < 1.0))
        throw std::domain_error("effective_horizon: epsilon*(1-gamma)/r_b must be < 1");
    double ratio = std::log(x) / std::log(cfg.gamma);
    // Guard the ceil against round-off when the bound lands on an integer.
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) < 1e-9) ratio = nearest;
    return static_cast<int>(std::ceil(ratio));
}

double terminal_reward_oracle(world::World snapshot, const Genome& g,
                              const world::PolicyFn& policies, const RewardConfig& cfg) {
    const int horizon = effective_horizon(cfg);
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < horizon; ++t) {
        total += discount * evolutionary_reward(snapshot, g);
        discount *= cfg.gamma;
        if (snapshot.extinct()) break; // kinship sums stay zero from here on
        if (t + 1 < horizon) snapshot.step(policies(snapshot));
    }
    return total;
}

} // namespace evogrid::kinrew
