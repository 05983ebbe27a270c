#include "evogrid/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "evogrid/common.hpp"

namespace evogrid::world {

namespace {

constexpr std::array<std::pair<std::int32_t, std::int32_t>, 4> kNeighborOffsets = {
    {{0, -1}, {1, 0}, {0, 1}, {-1, 0}}}; // N, E, S, W

std::pair<std::int32_t, std::int32_t> move_delta(MoveDir d) {
    switch (d) {
        case MoveDir::North: return {0, -1};
        case MoveDir::East: return {1, 0};
        case MoveDir::South: return {0, 1};
        case MoveDir::West: return {-1, 0};
        default: return {0, 0};
    }
}

} // namespace

void WorldConfig::validate() const {
    std::ostringstream err;
    if (width <= 0 || height <= 0)
        err << "world dimensions must be positive (" << width << "x" << height << ")";
    else if (founder_count < 1)
        err << "founder_count must be >= 1, got " << founder_count;
    else if (!(fertility_start <= fertility_end && fertility_end <= longevity))
        err << "require fertility_start <= fertility_end <= longevity, got "
            << fertility_start << " <= " << fertility_end << " <= " << longevity;
    else if (!(food_growth_rate > 0.0 && food_growth_rate <= food_capacity))
        err << "require 0 < food_growth_rate <= food_capacity, got f_r="
            << food_growth_rate << ", c_f=" << food_capacity;
    else if (endowment <= 0.0)
        err << "endowment must be positive, got " << endowment;
    else if (initial_health < 1)
        err << "initial_health must be >= 1, got " << initial_health;
    else if (genome_length < 1)
        err << "genome_length must be >= 1, got " << genome_length;
    else if (reproduction == Reproduction::Asexual && genome_length != 1)
        err << "asexual worlds use genome_length 1, got " << genome_length;
    else if (reproduction == Reproduction::Sexual && genome_length % 2 != 0)
        err << "sexual worlds need an even genome_length, got " << genome_length;
    else if (food_layout.kind == FoodLayout::Kind::UniformRandom &&
             (food_layout.density < 0.0 || food_layout.density > 1.0))
        err << "food layout density must be in [0,1], got " << food_layout.density;
    else if (count_soft_cap <= 0.0)
        err << "count_soft_cap must be positive, got " << count_soft_cap;
    else
        return;
    throw ConfigError("world config: " + err.str());
}

World::World(const WorldConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    grid_.resize(static_cast<std::size_t>(cfg_.width) * cfg_.height);

    // Food sources per layout, all starting at capacity.
    for (auto& t : grid_) {
        bool source = false;
        switch (cfg_.food_layout.kind) {
            case FoodLayout::Kind::UniformRandom:
                source = rng_.uniform_real() < cfg_.food_layout.density;
                break;
            case FoodLayout::Kind::All: source = true; break;
            case FoodLayout::Kind::None: source = false; break;
        }
        if (source) {
            t.kind = TileKind::FoodSource;
            t.food = cfg_.food_capacity;
        }
    }
    rebuild_sources();

    const std::int64_t tiles = static_cast<std::int64_t>(cfg_.width) * cfg_.height;
    if (cfg_.founder_count > tiles)
        throw ConfigError("world too small to place founders");

    for (std::int32_t f = 0; f < cfg_.founder_count; ++f) {
        // Rejection-sample an unoccupied tile.
        std::size_t idx;
        do {
            idx = static_cast<std::size_t>(rng_.uniform_int(static_cast<std::uint64_t>(tiles)));
        } while (grid_[idx].occupied());
        AgentState a;
        a.id = next_id_++;
        a.x = static_cast<std::int32_t>(idx % cfg_.width);
        a.y = static_cast<std::int32_t>(idx / cfg_.width);
        a.health = cfg_.initial_health;
        a.age = 0;
        a.food_stored = cfg_.endowment;
        a.genome = Genome::uniform(static_cast<std::size_t>(cfg_.genome_length),
                                   static_cast<std::uint32_t>(f));
        a.policy_slot = f;
        place(std::move(a));
    }
}

World World::custom(const WorldConfig& cfg, std::vector<Tile> tiles,
                    std::vector<AgentState> agents, std::int64_t tick) {
    cfg.validate();
    if (tiles.size() != static_cast<std::size_t>(cfg.width) * cfg.height)
        throw ConfigError("custom world: tile array does not match dimensions");
    World w;
    w.cfg_ = cfg;
    w.rng_ = Rng(cfg.seed);
    w.grid_ = std::move(tiles);
    w.tick_ = tick;
    for (auto& t : w.grid_) t.occupant = kNoAgent;
    std::sort(agents.begin(), agents.end(),
              [](const AgentState& a, const AgentState& b) { return a.id < b.id; });
    for (auto& a : agents) {
        if (a.genome.size() != static_cast<std::size_t>(cfg.genome_length))
            throw ConfigError("custom world: genome length mismatch");
        w.next_id_ = std::max(w.next_id_, a.id + 1);
        w.place(std::move(a));
    }
    w.rebuild_sources();
    return w;
}

void World::rebuild_sources() {
    source_tiles_.clear();
    for (std::size_t i = 0; i < grid_.size(); ++i)
        if (grid_[i].kind == TileKind::FoodSource)
            source_tiles_.push_back(static_cast<std::int32_t>(i));
}

std::int32_t World::wrap_x(std::int32_t x) const {
    if (x < 0) return x + cfg_.width;
    if (x >= cfg_.width) return x - cfg_.width;
    return x;
}

std::int32_t World::wrap_y(std::int32_t y) const {
    if (y < 0) return y + cfg_.height;
    if (y >= cfg_.height) return y - cfg_.height;
    return y;
}

const AgentState* World::find(AgentId id) const {
    auto it = std::lower_bound(agents_.begin(), agents_.end(), id,
                               [](const AgentState& a, AgentId v) { return a.id < v; });
    if (it != agents_.end() && it->id == id && it->alive) return &*it;
    return nullptr;
}

AgentState* World::find_mutable(AgentId id) {
    return const_cast<AgentState*>(std::as_const(*this).find(id));
}

void World::place(AgentState agent) {
    Tile& t = grid_[tile_index(agent.x, agent.y)];
    if (t.occupied()) throw ConfigError("two agents placed on one tile");
    t.occupant = agent.id;
    agents_.push_back(std::move(agent));
    // Keep id order; insertions are monotone except in custom().
    for (std::size_t i = agents_.size(); i > 1 && agents_[i - 1].id < agents_[i - 2].id; --i)
        std::swap(agents_[i - 1], agents_[i - 2]);
}

void World::restore_counters(std::int64_t tick, AgentId next_id) {
    tick_ = tick;
    next_id_ = next_id;
}

void World::kill(AgentState& agent, TickEvents::DeathCause cause, TickEvents& ev,
                 double destroyed_fraction) {
    const double residual = std::max(0.0, agent.food_stored);
    TickEvents::Death d;
    d.id = agent.id;
    d.cause = cause;
    d.age = agent.age;
    d.family = agent.genome.alleles.empty() ? 0 : agent.genome.alleles[0];
    d.food_lost = residual * destroyed_fraction;
    ev.deaths.push_back(d);
    ev.food_destroyed += residual * destroyed_fraction;
    grid_[tile_index(agent.x, agent.y)].occupant = kNoAgent;
    agent.health = 0;
    agent.food_stored = 0.0;
    agent.alive = false;
}

bool World::fertile(const AgentState& a) const {
    if (a.age < cfg_.fertility_start || a.age > cfg_.fertility_end) return false;
    const double threshold =
        (cfg_.reproduction == Reproduction::Asexual) ? 2.0 * cfg_.endowment : cfg_.endowment;
    return a.food_stored > threshold;
}

void World::try_reproduce(AgentState& parent, TickEvents& ev,
                          std::vector<AgentId>& newborns, std::vector<AgentId>& bred) {
    if (!fertile(parent)) return;
    const bool already_bred =
        std::find(bred.begin(), bred.end(), parent.id) != bred.end();
    if (already_bred) return;

    auto empty_neighbors = [&](const AgentState& a, std::vector<std::size_t>& out) {
        for (const auto& [dx, dy] : kNeighborOffsets) {
            const std::size_t idx = tile_index(wrap_x(a.x + dx), wrap_y(a.y + dy));
            if (!grid_[idx].occupied() &&
                std::find(out.begin(), out.end(), idx) == out.end())
                out.push_back(idx);
        }
    };

    AgentState child;
    AgentId parent_b = kNoAgent;
    std::vector<std::size_t> tiles;

    if (cfg_.reproduction == Reproduction::Asexual) {
        empty_neighbors(parent, tiles);
        if (tiles.empty()) return;
        child.genome = parent.genome;
        child.food_stored = cfg_.endowment;
        child.policy_slot = parent.policy_slot;
        parent.food_stored -= cfg_.endowment;
        bred.push_back(parent.id);
    } else {
        // Mate: a fertile adjacent agent that has not bred this tick.
        std::vector<AgentId> mates;
        for (const auto& [dx, dy] : kNeighborOffsets) {
            const Tile& t = grid_[tile_index(wrap_x(parent.x + dx), wrap_y(parent.y + dy))];
            if (!t.occupied() || t.occupant == parent.id) continue;
            if (std::find(mates.begin(), mates.end(), t.occupant) != mates.end()) continue;
            const AgentState* m = find(t.occupant);
            if (m && fertile(*m) &&
                std::find(bred.begin(), bred.end(), m->id) == bred.end())
                mates.push_back(m->id);
        }
        if (mates.empty()) return;
        AgentState* mate =
            find_mutable(mates[static_cast<std::size_t>(rng_.uniform_int(mates.size()))]);

        // Birth tile: uniform over the union of both parents' empty neighbors.
        empty_neighbors(parent, tiles);
        empty_neighbors(*mate, tiles);
        if (tiles.empty()) return;

        // Exactly half of the child's genes come from each parent, positions
        // chosen uniformly at random.
        const std::size_t n = parent.genome.size();
        std::vector<std::uint32_t> positions(n);
        for (std::size_t p = 0; p < n; ++p) positions[p] = static_cast<std::uint32_t>(p);
        rng_.shuffle(positions);
        child.genome = mate->genome;
        for (std::size_t p = 0; p < n / 2; ++p)
            child.genome.alleles[positions[p]] = parent.genome.alleles[positions[p]];

        child.food_stored = cfg_.endowment;
        child.policy_slot = parent.policy_slot;
        parent.food_stored -= cfg_.endowment / 2.0;
        mate->food_stored -= cfg_.endowment / 2.0;
        parent_b = mate->id;
        bred.push_back(parent.id);
        bred.push_back(mate->id);
    }

    const std::size_t tile_idx =
        tiles[static_cast<std::size_t>(rng_.uniform_int(tiles.size()))];
    child.id = next_id_++;
    child.x = static_cast<std::int32_t>(tile_idx % cfg_.width);
    child.y = static_cast<std::int32_t>(tile_idx / cfg_.width);
    child.health = cfg_.initial_health;
    child.age = 0;
    ev.births.push_back({child.id, parent.id, parent_b, child.x, child.y});
    newborns.push_back(child.id);
    place(std::move(child));
}

TickEvents World::step(const ActionMap& actions) {
    TickEvents ev;
    ev.tick = tick_;

    if (actions.size() != agents_.size())
        throw std::invalid_argument("step: need exactly one action per living agent");
    std::vector<AgentId> order;
    order.reserve(agents_.size());
    for (const auto& a : agents_) {
        if (actions.find(a.id) == actions.end())
            throw std::invalid_argument("step: missing action for agent " +
                                        std::to_string(a.id));
        order.push_back(a.id);
    }
    rng_.shuffle(order);

    std::vector<AgentId> newborns;
    std::vector<AgentId> bred;

    // Per-agent phase in shuffled order: move, harvest, reproduce, eat, age, die.
    for (AgentId id : order) {
        AgentState* a = find_mutable(id);
        if (!a) continue;
        const Action act = actions.at(id);

        if (act.move != MoveDir::Stay) {
            const auto [dx, dy] = move_delta(act.move);
            const std::int32_t nx = wrap_x(a->x + dx);
            const std::int32_t ny = wrap_y(a->y + dy);
            Tile& target = grid_[tile_index(nx, ny)];
            if (!target.occupied()) {
                grid_[tile_index(a->x, a->y)].occupant = kNoAgent;
                target.occupant = a->id;
                a->x = nx;
                a->y = ny;
            } // moving onto an occupied tile is a no-op
        }

        Tile& here = grid_[tile_index(a->x, a->y)];
        if (here.food > 0.0) {
            a->food_stored += here.food;
            ev.harvests.push_back({a->id, here.food, a->genome});
            here.food = 0.0;
        }

        try_reproduce(*a, ev, newborns, bred);
        a = find_mutable(id); // births may grow the agent vector

        ev.food_eaten += std::min(1.0, a->food_stored);
        a->food_stored -= 1.0;
        a->age += 1;

        if (a->food_stored <= 0.0)
            kill(*a, TickEvents::DeathCause::Starvation, ev, 1.0);
        else if (a->age > cfg_.longevity)
            kill(*a, TickEvents::DeathCause::OldAge, ev, 1.0);
    }

    // Attack phase, same order. Agents that died in the per-agent phase (or
    // earlier in this phase) neither attack nor are attacked; newborns are
    // not attackable until next tick.
    for (AgentId id : order) {
        AgentState* attacker = find_mutable(id);
        if (!attacker) continue;
        if (!actions.at(id).attack) continue;

        std::vector<AgentId> candidates;
        for (const auto& [dx, dy] : kNeighborOffsets) {
            const Tile& t = grid_[tile_index(wrap_x(attacker->x + dx), wrap_y(attacker->y + dy))];
            if (!t.occupied() || t.occupant == attacker->id) continue;
            if (std::find(candidates.begin(), candidates.end(), t.occupant) !=
                candidates.end())
                continue;
            if (std::find(newborns.begin(), newborns.end(), t.occupant) != newborns.end())
                continue;
            candidates.push_back(t.occupant);
        }
        if (candidates.empty()) continue;

        AgentState* victim = find_mutable(
            candidates[static_cast<std::size_t>(rng_.uniform_int(candidates.size()))]);
        const double k = kinship(attacker->genome, victim->genome);
        const bool blocked = cfg_.blocked_family.has_value() && k == 1.0 &&
                             !attacker->genome.alleles.empty() &&
                             attacker->genome.alleles[0] == *cfg_.blocked_family;

        TickEvents::AttackEvent rec;
        rec.attacker = attacker->id;
        rec.victim = victim->id;
        rec.blocked = blocked;
        rec.kinship = k;
        rec.attacker_family = attacker->genome.alleles.empty() ? 0 : attacker->genome.alleles[0];
        rec.attacker_age = attacker->age;
        rec.victim_age = victim->age;
        if (!blocked) {
            victim->health -= 1;
            if (victim->health <= 0) {
                rec.lethal = true;
                rec.food_transferred = 0.5 * victim->food_stored;
                attacker->food_stored += rec.food_transferred;
                victim->food_stored -= rec.food_transferred;
                kill(*victim, TickEvents::DeathCause::Attack, ev, 1.0);
            }
        }
        ev.attacks.push_back(rec);
    }

    // Food growth on every source tile, capped at capacity.
    for (std::int32_t idx : source_tiles_) {
        Tile& t = grid_[static_cast<std::size_t>(idx)];
        const double grown = std::min(cfg_.food_growth_rate, cfg_.food_capacity - t.food);
        if (grown > 0.0) {
            t.food += grown;
            ev.food_grown += grown;
        }
    }

    agents_.erase(std::remove_if(agents_.begin(), agents_.end(),
                                 [](const AgentState& a) { return !a.alive; }),
                  agents_.end());
    ++tick_;
    return ev;
}

Observation World::observe(AgentId id) const {
    const AgentState* self = find(id);
    if (!self) throw std::invalid_argument("observe: agent " + std::to_string(id) +
                                           " is dead or unknown");
    Observation obs;
    const int r = Observation::kGrid / 2;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const Tile& t = tile_at(wrap_x(self->x + dx), wrap_y(self->y + dy));
            const std::size_t base =
                (static_cast<std::size_t>(dy + r) * Observation::kGrid + (dx + r)) *
                Observation::kChannels;
            obs.data[base + 0] = t.food / cfg_.food_capacity;
            if (t.occupied()) {
                const AgentState* o = find(t.occupant);
                obs.data[base + 1] = 1.0;
                obs.data[base + 2] = static_cast<double>(o->age) / cfg_.longevity;
                obs.data[base + 3] = o->food_stored / (4.0 * cfg_.endowment);
                obs.data[base + 4] = cfg_.mask_kinship ? 0.0 : kinship(self->genome, o->genome);
                obs.data[base + 5] = static_cast<double>(o->health) / cfg_.initial_health;
            }
        }
    }
    double family = 0.0;
    for (const auto& a : agents_) family += kinship(self->genome, a.genome);
    obs.data[Observation::kGridSize + 0] = static_cast<double>(self->x) / cfg_.width;
    obs.data[Observation::kGridSize + 1] = static_cast<double>(self->y) / cfg_.height;
    obs.data[Observation::kGridSize + 2] = family / cfg_.count_soft_cap;
    obs.data[Observation::kGridSize + 3] =
        static_cast<double>(agents_.size()) / cfg_.count_soft_cap;
    return obs;
}

double World::total_tile_food() const {
    double sum = 0.0;
    for (std::int32_t idx : source_tiles_) sum += grid_[static_cast<std::size_t>(idx)].food;
    return sum;
}

double World::total_agent_food() const {
    double sum = 0.0;
    for (const auto& a : agents_) sum += a.food_stored;
    return sum;
}

void World::remap_policy_slots(std::span<const std::int32_t> map) {
    for (auto& a : agents_) {
        if (a.policy_slot < 0 || static_cast<std::size_t>(a.policy_slot) >= map.size())
            throw ConfigError("remap_policy_slots: slot out of range");
        a.policy_slot = map[static_cast<std::size_t>(a.policy_slot)];
    }
}

double World::family_weight(AgentId id) const {
    const AgentState* self = find(id);
    if (!self) throw std::invalid_argument("family_weight: dead or unknown agent");
    double n = 0.0;
    for (const auto& a : agents_) n += kinship(self->genome, a.genome);
    return n;
}

ActionMap all_stay(const World& w) {
    ActionMap m;
    for (const auto& a : w.agents()) m[a.id] = Action{};
    return m;
}

ActionMap random_actions(const World& w, Rng& rng) {
    ActionMap m;
    for (const auto& a : w.agents())
        m[a.id] = Action::from_index(static_cast<int>(rng.uniform_int(kActionCount)));
    return m;
}

} // namespace evogrid::world
