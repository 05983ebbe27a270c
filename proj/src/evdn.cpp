#include "evogrid/evdn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evogrid/common.hpp"
#include "evogrid/io.hpp"

namespace evogrid::evdn {

double joint_q(std::span<const double> values, std::span<const double> kinships) {
    if (values.size() != kinships.size())
        throw std::domain_error("joint_q: value/kinship length mismatch");
    double num = 0.0, n = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        num += kinships[j] * values[j];
        n += kinships[j];
    }
    if (!(n > 0.0)) throw std::domain_error("joint_q: empty family census");
    return num / n;
}

double terminal_estimate(std::span<const double> greedy_values,
                         std::span<const double> kinships) {
    double num = 0.0, n = 0.0;
    for (std::size_t j = 0; j < greedy_values.size(); ++j) {
        num += kinships[j] * greedy_values[j];
        n += kinships[j];
    }
    return n > 0.0 ? num / n : 0.0;
}

world::Action act(const std::array<double, neural::kActionCount>& q, double eps, Rng& rng) {
    if (eps < 0.0 || eps > 1.0) throw std::domain_error("act: epsilon must be in [0,1]");
    if (rng.uniform_real() < eps)
        return world::Action::from_index(
            static_cast<int>(rng.uniform_int(neural::kActionCount)));
    return world::Action::from_index(neural::greedy_action(q));
}

std::vector<double> family_gradient_coeffs(const std::vector<Genome>& genomes,
                                           const std::vector<double>& deltas) {
    const std::size_t m = genomes.size();
    if (deltas.size() != m)
        throw std::domain_error("family_gradient_coeffs: length mismatch");
    std::vector<double> coeffs(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double n = 0.0;
        for (std::size_t j = 0; j < m; ++j) n += kinship(genomes[i], genomes[j]);
        const double scale = -2.0 * deltas[i] / n; // n >= 1 (self term)
        for (std::size_t j = 0; j < m; ++j) {
            const double k = kinship(genomes[i], genomes[j]);
            if (k > 0.0) coeffs[j] += scale * k;
        }
    }
    return coeffs;
}

PolicyPool PolicyPool::create(int count, const neural::ArchSpec& arch, std::uint64_t seed) {
    PolicyPool pool;
    for (int i = 0; i < count; ++i) {
        pool.nets.emplace_back(arch, derive_seed(seed, 0x9e70 + static_cast<std::uint64_t>(i), 0));
        pool.opt.emplace_back(static_cast<std::size_t>(pool.nets.back().param_count()));
    }
    return pool;
}

void TrainerConfig::validate() const {
    if (env_count < 1) throw ConfigError("trainer: env_count must be >= 1");
    if (policy_count < 1) throw ConfigError("trainer: policy_count must be >= 1");
    if (train_len_min < 1 || train_len_max < train_len_min)
        throw ConfigError("trainer: need 1 <= train_len_min <= train_len_max");
    if (eps_start < 0 || eps_start > 1 || eps_end < 0 || eps_end > 1)
        throw ConfigError("trainer: epsilon schedule must stay in [0,1]");
    if (eps_decay_ticks < 1) throw ConfigError("trainer: eps_decay_ticks must be >= 1");
    if (total_ticks < 0) throw ConfigError("trainer: total_ticks must be >= 0");
    arch.validate();
}

Trainer::Trainer(const world::WorldConfig& wcfg, const kinrew::RewardConfig& rcfg,
                 const TrainerConfig& tcfg, std::uint64_t seed)
    : wcfg_(wcfg), rcfg_(rcfg), tcfg_(tcfg), seed_(seed) {
    wcfg_.validate();
    tcfg_.validate();
    pool_ = PolicyPool::create(tcfg_.policy_count, tcfg_.arch,
                               derive_seed(seed, 0xbadc0de, 1));
    const std::size_t params = static_cast<std::size_t>(pool_.nets[0].param_count());
    envs_.resize(static_cast<std::size_t>(tcfg_.env_count));
    for (int e = 0; e < tcfg_.env_count; ++e) {
        envs_[e].act_rng = Rng(derive_seed(seed, 0xac7 + e, 2));
        envs_[e].grad_partial.assign(static_cast<std::size_t>(tcfg_.policy_count),
                                     std::vector<double>(params, 0.0));
        reset_env(envs_[e], e);
    }
    grads_.assign(static_cast<std::size_t>(tcfg_.policy_count),
                  neural::GradientBatch(params));
}

double Trainer::current_epsilon() const {
    const double frac = std::min(
        1.0, static_cast<double>(global_tick_) / static_cast<double>(tcfg_.eps_decay_ticks));
    return tcfg_.eps_start + (tcfg_.eps_end - tcfg_.eps_start) * frac;
}

void Trainer::reset_env(EnvSlot& s, int env_index) {
    s.episode_index += 1;
    world::WorldConfig cfg = wcfg_;
    cfg.seed = derive_seed(seed_, 0xe0000 + static_cast<std::uint64_t>(env_index),
                           s.episode_index);
    // Asexual training samples policies with replacement per episode; a
    // single-policy pool degenerates to the identity assignment.
    std::vector<std::int32_t> assignment(static_cast<std::size_t>(cfg.founder_count));
    for (auto& a : assignment)
        a = static_cast<std::int32_t>(
            s.act_rng.uniform_int(static_cast<std::uint64_t>(tcfg_.policy_count)));
    s.episode_len =
        tcfg_.train_len_min +
        static_cast<std::int64_t>(s.act_rng.uniform_int(
            static_cast<std::uint64_t>(tcfg_.train_len_max - tcfg_.train_len_min + 1)));
    s.world.emplace(cfg);
    s.world->remap_policy_slots(assignment);
    s.tick_in_episode = 0;
}

void Trainer::run_env_tick(EnvSlot& s, int env_index, double eps) {
    s.batch_size = 0;
    s.loss_sum = 0.0;
    s.env_stats = TickStats{};
    for (auto& p : s.grad_partial) std::fill(p.begin(), p.end(), 0.0);

    if (s.tick_in_episode >= s.episode_len || s.world->extinct()) {
        // Episode over (truncation already bootstrapped as non-terminal last
        // tick) or the world died out; start a fresh one.
        reset_env(s, env_index);
        s.env_stats.episodes_completed = 1;
    }

    world::World& w = *s.world;
    const auto& census = w.agents();
    const std::size_t m = census.size();
    s.ids.resize(m);
    s.slots.resize(m);
    s.genomes.resize(m);
    s.obs.resize(m);
    s.actions.resize(m);
    s.q_sel.resize(m);
    world::ActionMap action_map;
    action_map.reserve(m);

    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = census[i];
        s.ids[i] = a.id;
        s.slots[i] = a.policy_slot;
        s.genomes[i] = a.genome;
        s.obs[i] = w.observe(a.id);
        const auto q = pool_.nets[static_cast<std::size_t>(a.policy_slot)].forward(
            s.obs[i], s.ws);
        const world::Action action = act(q, eps, s.act_rng);
        s.actions[i] = action.index();
        s.q_sel[i] = q[static_cast<std::size_t>(action.index())];
        action_map.emplace(a.id, action);
    }

    const world::TickEvents ev = w.step(action_map);

    // Post-tick census: observations and greedy values for every survivor
    // and newborn, under the same parameters used for acting.
    const auto& next_census = w.agents();
    const std::size_t mn = next_census.size();
    s.next_slots.resize(mn);
    s.next_genomes.resize(mn);
    s.next_obs.resize(mn);
    s.next_qmax.resize(mn);
    for (std::size_t j = 0; j < mn; ++j) {
        const auto& a = next_census[j];
        s.next_slots[j] = a.policy_slot;
        s.next_genomes[j] = a.genome;
        s.next_obs[j] = w.observe(a.id);
        const auto q = pool_.nets[static_cast<std::size_t>(a.policy_slot)].forward(
            s.next_obs[j], s.ws);
        s.next_qmax[j] = q[static_cast<std::size_t>(neural::greedy_action(q))];
    }

    // Rewards and targets.
    s.alive_next.resize(m);
    s.rewards.resize(m);
    s.deltas.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const bool alive = w.find(s.ids[i]) != nullptr;
        s.alive_next[i] = alive ? 1 : 0;
        double reward = 0.0;
        if (alive)
            reward = rcfg_.kind == kinrew::RewardKind::Sugary
                         ? kinrew::sugary_reward(ev, s.genomes[i])
                         : kinrew::evolutionary_reward(w, s.genomes[i]);
        s.rewards[i] = reward;

        double weighted = 0.0, n_next = 0.0;
        for (std::size_t j = 0; j < mn; ++j) {
            const double k = kinship(s.genomes[i], s.next_genomes[j]);
            weighted += k * s.next_qmax[j];
            n_next += k;
        }
        double y;
        if (alive) {
            // Alive at t+1 implies the agent itself is in the census, so
            // n_next >= 1 and the joint greedy value is well defined.
            y = learning_target(false, reward, rcfg_.gamma, weighted / n_next);
        } else {
            y = learning_target(true, 0.0, rcfg_.gamma,
                                n_next > 0.0 ? weighted / n_next : 0.0);
        }

        double num = 0.0, n_now = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double k = kinship(s.genomes[i], s.genomes[j]);
            num += k * s.q_sel[j];
            n_now += k;
        }
        const double q_joint = num / n_now;
        s.deltas[i] = y - q_joint;
        s.loss_sum += s.deltas[i] * s.deltas[i];
    }

    // Gradient accumulation: actor j's network receives the kinship-weighted
    // residual flow from every family member's target.
    const std::vector<double> coeffs = family_gradient_coeffs(s.genomes, s.deltas);
    for (std::size_t j = 0; j < m; ++j) {
        if (coeffs[j] == 0.0) continue;
        pool_.nets[static_cast<std::size_t>(s.slots[j])].accumulate_gradient(
            s.obs[j], s.actions[j], coeffs[j],
            s.grad_partial[static_cast<std::size_t>(s.slots[j])], s.ws);
    }
    s.batch_size = static_cast<std::int64_t>(m);

    // Tick telemetry.
    s.env_stats.population = static_cast<int>(mn);
    s.env_stats.births = static_cast<int>(ev.births.size());
    for (const auto& d : ev.deaths) {
        if (d.cause == world::TickEvents::DeathCause::Starvation)
            s.env_stats.deaths_starvation++;
        else if (d.cause == world::TickEvents::DeathCause::OldAge)
            s.env_stats.deaths_age++;
        else
            s.env_stats.deaths_attack++;
    }
    for (const auto& at : ev.attacks) {
        if (at.blocked) continue;
        if (at.kinship == 1.0)
            s.env_stats.attacks_intra++;
        else
            s.env_stats.attacks_inter++;
    }
    s.tick_in_episode += 1;
}

TickStats Trainer::step() {
    const double eps = current_epsilon();
    const int n_envs = tcfg_.env_count;

#ifdef _OPENMP
    if (tcfg_.threads != 1) {
        const int requested = tcfg_.threads > 0 ? tcfg_.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(requested)
        for (int e = 0; e < n_envs; ++e) run_env_tick(envs_[e], e, eps);
    } else {
        for (int e = 0; e < n_envs; ++e) run_env_tick(envs_[e], e, eps);
    }
#else
    for (int e = 0; e < n_envs; ++e) run_env_tick(envs_[e], e, eps);
#endif

    // Deterministic reduction in environment order, then one update per
    // policy from the batch mean.
    TickStats stats;
    stats.tick = global_tick_;
    stats.epsilon = eps;
    std::int64_t batch = 0;
    double loss_sum = 0.0;
    for (const auto& s : envs_) {
        batch += s.batch_size;
        loss_sum += s.loss_sum;
        stats.population += s.env_stats.population;
        stats.births += s.env_stats.births;
        stats.deaths_starvation += s.env_stats.deaths_starvation;
        stats.deaths_age += s.env_stats.deaths_age;
        stats.deaths_attack += s.env_stats.deaths_attack;
        stats.attacks_intra += s.env_stats.attacks_intra;
        stats.attacks_inter += s.env_stats.attacks_inter;
        episodes_completed_ += s.env_stats.episodes_completed;
    }
    stats.experiences = batch;
    stats.loss = batch > 0 ? loss_sum / static_cast<double>(batch) : 0.0;
    stats.episodes_completed = episodes_completed_;

    if (batch > 0) {
        const double inv = 1.0 / static_cast<double>(batch);
        for (int p = 0; p < tcfg_.policy_count; ++p) {
            auto& g = grads_[static_cast<std::size_t>(p)];
            g.reset();
            for (const auto& s : envs_) {
                const auto& part = s.grad_partial[static_cast<std::size_t>(p)];
                for (std::size_t i = 0; i < g.g.size(); ++i) g.g[i] += part[i];
            }
            g.scale(inv);
            g.samples = batch;
            neural::apply_update(pool_.nets[static_cast<std::size_t>(p)], g,
                                 pool_.opt[static_cast<std::size_t>(p)], tcfg_.optimizer);
        }
    }

    total_experiences_ += batch;
    global_tick_ += 1;
    return stats;
}

std::vector<std::uint8_t> Trainer::serialize() const {
    io::BinaryWriter out;
    out.u32(0x54475645); // "EVGT"
    out.u32(1);
    io::write_world_config(out, wcfg_);
    out.f64(rcfg_.gamma);
    out.f64(rcfg_.epsilon);
    out.f64(rcfg_.r_b);
    out.u8(static_cast<std::uint8_t>(rcfg_.kind));
    out.i32(tcfg_.env_count);
    out.i32(tcfg_.policy_count);
    out.i32(tcfg_.train_len_min);
    out.i32(tcfg_.train_len_max);
    out.i32(tcfg_.test_len);
    out.f64(tcfg_.eps_start);
    out.f64(tcfg_.eps_end);
    out.i64(tcfg_.eps_decay_ticks);
    out.u8(static_cast<std::uint8_t>(tcfg_.optimizer.kind));
    out.f64(tcfg_.optimizer.learning_rate);
    out.f64(tcfg_.optimizer.beta1);
    out.f64(tcfg_.optimizer.beta2);
    out.f64(tcfg_.optimizer.adam_eps);
    out.u8(static_cast<std::uint8_t>(tcfg_.arch.kind));
    out.i32(tcfg_.arch.mlp_hidden[0]);
    out.i32(tcfg_.arch.mlp_hidden[1]);
    out.i32(tcfg_.arch.mlp_hidden[2]);
    out.i32(tcfg_.arch.conv_filters);
    out.i32(tcfg_.arch.conv_dense);
    out.i64(tcfg_.total_ticks);
    out.i64(tcfg_.checkpoint_every);
    out.i32(tcfg_.threads);
    out.u64(seed_);
    out.i64(global_tick_);
    out.i64(total_experiences_);
    out.i64(episodes_completed_);
    for (int p = 0; p < tcfg_.policy_count; ++p) {
        const auto net = io::serialize_network(pool_.nets[static_cast<std::size_t>(p)]);
        out.u64(net.size());
        for (std::uint8_t b : net) out.u8(b);
        io::write_optimizer(out, pool_.opt[static_cast<std::size_t>(p)]);
    }
    for (const auto& s : envs_) {
        out.u64(s.episode_index);
        out.i64(s.episode_len);
        out.i64(s.tick_in_episode);
        out.str(s.act_rng.save_state());
        const auto snap = io::serialize_world(*s.world);
        out.u64(snap.size());
        for (std::uint8_t b : snap) out.u8(b);
    }
    return out.bytes();
}

Trainer Trainer::deserialize(std::span<const std::uint8_t> bytes) {
    io::BinaryReader r(bytes);
    if (r.u32() != 0x54475645) throw IoError("not a trainer checkpoint");
    if (r.u32() != 1) throw IoError("unsupported trainer checkpoint version");
    Trainer t;
    t.wcfg_ = io::read_world_config(r);
    t.rcfg_.gamma = r.f64();
    t.rcfg_.epsilon = r.f64();
    t.rcfg_.r_b = r.f64();
    t.rcfg_.kind = static_cast<kinrew::RewardKind>(r.u8());
    t.tcfg_.env_count = r.i32();
    t.tcfg_.policy_count = r.i32();
    t.tcfg_.train_len_min = r.i32();
    t.tcfg_.train_len_max = r.i32();
    t.tcfg_.test_len = r.i32();
    t.tcfg_.eps_start = r.f64();
    t.tcfg_.eps_end = r.f64();
    t.tcfg_.eps_decay_ticks = r.i64();
    t.tcfg_.optimizer.kind = static_cast<neural::OptimizerKind>(r.u8());
    t.tcfg_.optimizer.learning_rate = r.f64();
    t.tcfg_.optimizer.beta1 = r.f64();
    t.tcfg_.optimizer.beta2 = r.f64();
    t.tcfg_.optimizer.adam_eps = r.f64();
    t.tcfg_.arch.kind = static_cast<neural::ArchKind>(r.u8());
    t.tcfg_.arch.mlp_hidden[0] = r.i32();
    t.tcfg_.arch.mlp_hidden[1] = r.i32();
    t.tcfg_.arch.mlp_hidden[2] = r.i32();
    t.tcfg_.arch.conv_filters = r.i32();
    t.tcfg_.arch.conv_dense = r.i32();
    t.tcfg_.total_ticks = r.i64();
    t.tcfg_.checkpoint_every = r.i64();
    t.tcfg_.threads = r.i32();
    t.seed_ = r.u64();
    t.global_tick_ = r.i64();
    t.total_experiences_ = r.i64();
    t.episodes_completed_ = r.i64();
    const std::size_t params = static_cast<std::size_t>(t.tcfg_.arch.param_count());
    for (int p = 0; p < t.tcfg_.policy_count; ++p) {
        const std::uint64_t n = r.u64();
        std::vector<std::uint8_t> blob(n);
        for (auto& b : blob) b = r.u8();
        t.pool_.nets.push_back(io::deserialize_network(blob));
        t.pool_.opt.push_back(io::read_optimizer(r));
    }
    t.envs_.resize(static_cast<std::size_t>(t.tcfg_.env_count));
    for (auto& s : t.envs_) {
        s.episode_index = r.u64();
        s.episode_len = r.i64();
        s.tick_in_episode = r.i64();
        s.act_rng.load_state(r.str());
        const std::uint64_t n = r.u64();
        std::vector<std::uint8_t> blob(n);
        for (auto& b : blob) b = r.u8();
        s.world = io::deserialize_world(blob);
        s.grad_partial.assign(static_cast<std::size_t>(t.tcfg_.policy_count),
                              std::vector<double>(params, 0.0));
    }
    t.grads_.assign(static_cast<std::size_t>(t.tcfg_.policy_count),
                    neural::GradientBatch(params));
    return t;
}

} // namespace evogrid::evdn
