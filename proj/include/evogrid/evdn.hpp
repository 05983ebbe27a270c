#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evogrid/kinrew.hpp"
#include "evogrid/neural.hpp"
#include "evogrid/rng.hpp"
#include "evogrid/world.hpp"

namespace evogrid::evdn {

/// Kinship-weighted mean of family members' action values (agent i's joint
/// value). `kinships[j]` = k(g_i, g_j) over the living census including i.
double joint_q(std::span<const double> values, std::span<const double> kinships);

/// Bootstrapped final reward of a dying agent from the survivors' greedy
/// values; zero when no family survives. The census here excludes the dead
/// agent.
double terminal_estimate(std::span<const double> greedy_values,
                         std::span<const double> kinships);

/// Q-learning target: the terminal branch passes the terminal estimate
/// through unchanged, otherwise r + gamma * (next joint greedy value).
inline double learning_target(bool terminal, double reward, double gamma,
                              double next_value) {
    return terminal ? next_value : reward + gamma * next_value;
}

/// Epsilon-greedy over the 10 heads. Greedy ties break toward the lowest
/// action index. Draw order: one uniform real; one uniform int when exploring.
world::Action act(const std::array<double, neural::kActionCount>& q, double eps, Rng& rng);

/// Per-actor gradient coefficients for one tick's residuals: actor j receives
/// sum_i -2*delta_i*k(g_i,g_j)/n_i. An actor unrelated to every residual
/// owner receives exactly zero.
std::vector<double> family_gradient_coeffs(const std::vector<Genome>& genomes,
                                           const std::vector<double>& deltas);

struct PolicyPool {
    std::vector<neural::QNetwork> nets;
    std::vector<neural::OptimizerState> opt;

    static PolicyPool create(int count, const neural::ArchSpec& arch, std::uint64_t seed);
    int size() const { return static_cast<int>(nets.size()); }
};

struct TrainerConfig {
    int env_count = 16;
    int policy_count = 5; // 5 for asexual, 1 for sexual
    int train_len_min = 450;
    int train_len_max = 550;
    int test_len = 500;
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::int64_t eps_decay_ticks = 20000;
    neural::OptimizerConfig optimizer;
    neural::ArchSpec arch;
    std::int64_t total_ticks = 50000;
    std::int64_t checkpoint_every = 1000;
    int threads = 0; // 0 = OpenMP default; 1 = serial reference lane

    void validate() const;
};

struct TickStats {
    std::int64_t tick = 0;
    double epsilon = 0.0;
    std::int64_t experiences = 0; // batch size consumed this tick
    double loss = 0.0;            // mean squared residual
    int population = 0;
    int births = 0;
    int deaths_starvation = 0;
    int deaths_age = 0;
    int deaths_attack = 0;
    int attacks_intra = 0;
    int attacks_inter = 0;
    std::int64_t episodes_completed = 0;
};

/// Replay-free E-VDN trainer over synchronized parallel environments. Each
/// tick: every environment steps once under epsilon-greedy actions, the batch
/// of per-agent experiences is consumed for exactly one optimizer update per
/// policy, then discarded.
///
/// Environments are independent; the parallel lane processes them with
/// OpenMP and accumulates per-environment gradient partials that are reduced
/// in environment order, so results are bit-identical for any thread count.
class Trainer {
public:
    Trainer(const world::WorldConfig& wcfg, const kinrew::RewardConfig& rcfg,
            const TrainerConfig& tcfg, std::uint64_t seed);

    TickStats step();

    const PolicyPool& pool() const { return pool_; }
    PolicyPool& mutable_pool() { return pool_; }
    const TrainerConfig& trainer_config() const { return tcfg_; }
    const world::WorldConfig& world_config() const { return wcfg_; }
    const kinrew::RewardConfig& reward_config() const { return rcfg_; }
    std::int64_t global_tick() const { return global_tick_; }
    std::int64_t total_experiences() const { return total_experiences_; }
    double current_epsilon() const;

    std::vector<std::uint8_t> serialize() const;
    static Trainer deserialize(std::span<const std::uint8_t> bytes);

private:
    struct EnvSlot {
        std::optional<world::World> world;
        Rng act_rng{0};
        std::int64_t episode_len = 0;
        std::int64_t tick_in_episode = 0;
        std::uint64_t episode_index = 0;
        neural::Workspace ws;
        std::vector<std::vector<double>> grad_partial; // per policy

        // Per-tick batch, reused across ticks.
        std::vector<world::AgentId> ids;
        std::vector<int> slots;
        std::vector<Genome> genomes;
        std::vector<world::Observation> obs;
        std::vector<int> actions;
        std::vector<double> q_sel;
        std::vector<std::uint8_t> alive_next;
        std::vector<double> rewards;
        std::vector<int> next_slots;
        std::vector<Genome> next_genomes;
        std::vector<world::Observation> next_obs;
        std::vector<double> next_qmax;
        std::vector<double> deltas;

        std::int64_t batch_size = 0;
        double loss_sum = 0.0;
        TickStats env_stats;
    };

    Trainer() = default;
    void reset_env(EnvSlot& slot, int env_index);
    void run_env_tick(EnvSlot& slot, int env_index, double eps);

    world::WorldConfig wcfg_;
    kinrew::RewardConfig rcfg_;
    TrainerConfig tcfg_;
    std::uint64_t seed_ = 0;
    PolicyPool pool_;
    std::vector<EnvSlot> envs_;
    std::vector<neural::GradientBatch> grads_; // per policy, reused
    std::int64_t global_tick_ = 0;
    std::int64_t total_experiences_ = 0;
    std::int64_t episodes_completed_ = 0;
};

} // namespace evogrid::evdn
