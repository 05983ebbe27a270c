#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "evogrid/neural.hpp"
#include "evogrid/rng.hpp"
#include "evogrid/world.hpp"

namespace evogrid::cmaes {

/// Two-stage fitness: cumulative family size while agents are still learning
/// to survive, then final family size once the median run reproduces. The
/// progression is monotone; a run never switches back.
enum class FitnessStage : std::uint8_t { CumulativeFamily = 0, FinalFamily = 1 };

/// One search distribution over policy parameters (rank-mu CMA-ES with
/// cumulative step-size adaptation). Minimizes; callers negate fitness.
class CmaState {
public:
    CmaState() = default;
    CmaState(Eigen::VectorXd initial_mean, double sigma0, int lambda /*0 = default*/);

    int dim() const { return static_cast<int>(mean_.size()); }
    int lambda() const { return lambda_; }
    std::int64_t generation() const { return generation_; }
    double sigma() const { return sigma_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return C_; }
    std::int64_t eigen_repairs() const { return repairs_; }

    /// lambda draws from N(mean, sigma^2 C).
    std::vector<Eigen::VectorXd> sample(Rng& rng);

    /// Standard mean/path/covariance/step update from the evaluated
    /// population. Rank-based: any permutation of (xs, losses) produces the
    /// same update. Ties are broken by lexicographic candidate comparison.
    void update(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& losses);

    std::vector<std::uint8_t> serialize() const;
    static CmaState deserialize(std::span<const std::uint8_t> bytes);

private:
    void refresh_eigensystem();

    int lambda_ = 0;
    int mu_ = 0;
    Eigen::VectorXd weights_;
    double mu_eff_ = 0.0;
    double cc_ = 0.0, cs_ = 0.0, c1_ = 0.0, cmu_ = 0.0, damps_ = 0.0, chi_n_ = 0.0;

    Eigen::VectorXd mean_;
    double sigma_ = 0.0;
    Eigen::MatrixXd C_;
    Eigen::VectorXd pc_, ps_;
    Eigen::MatrixXd B_;      // eigenbasis of C
    Eigen::VectorXd D_;      // sqrt of eigenvalues
    std::int64_t generation_ = 0;
    std::int64_t evals_ = 0;
    std::int64_t last_eigen_evals_ = 0;
    std::int64_t repairs_ = 0;
};

int default_lambda(int dim);

/// Minimizes the d-dimensional sphere function from a fixed start; returns
/// the best value reached within `max_generations`.
double sphere_self_test(int dim, int max_generations, std::uint64_t seed,
                        int* generations_used = nullptr);

struct CmaesConfig {
    int lambda = 0;            // 0 = 4 + floor(3 ln d)
    double sigma0 = 0.5;
    int episodes_per_eval = 3; // averaged to damp co-evolutionary noise
    int episode_length = 500;
    double stage_switch_births = 1.0; // median births per family triggering stage 2
    std::int64_t generations = 50;
    std::int64_t checkpoint_every = 10;
    int threads = 0;
    bool frozen_eval_seeds = false; // reuse the same episode seeds every generation
    neural::ArchSpec arch;

    void validate() const; // rejects LargeMlp (quadratic memory guard)
};

/// Fitness of one joint episode: the five candidates control the five founder
/// families of an asexual world for `length` ticks (greedy actions). Returns
/// per-family cumulative or final family size; the initial census counts.
std::vector<double> evaluate_candidate_episode(
    const world::WorldConfig& wcfg, const neural::ArchSpec& arch,
    const std::vector<std::vector<double>>& candidate_params, FitnessStage stage,
    int length, std::uint64_t seed, std::vector<double>* births_per_family = nullptr);

struct GenerationStats {
    std::int64_t generation = 0;
    FitnessStage stage = FitnessStage::CumulativeFamily;
    bool switched_stage = false;
    std::vector<double> mean_fitness;    // per family, averaged over candidates
    std::vector<double> best_fitness;    // per family, this generation
    std::vector<double> best_so_far;     // per family, running max
    double median_min_births = 0.0;
};

/// Five independent search distributions, one per founder genome, evaluated
/// through shared joint episodes (candidate k of every family plays in the
/// same world).
class CmaesTrainer {
public:
    CmaesTrainer(const world::WorldConfig& wcfg, const CmaesConfig& cfg, std::uint64_t seed);

    GenerationStats run_generation();

    std::int64_t generation() const { return generation_; }
    FitnessStage stage() const { return stage_; }
    const CmaesConfig& config() const { return cfg_; }
    const world::WorldConfig& world_config() const { return wcfg_; }
    const std::vector<CmaState>& states() const { return states_; }
    const std::vector<std::vector<double>>& best_params() const { return best_params_; }
    const std::vector<double>& best_so_far() const { return best_so_far_; }

    std::vector<std::uint8_t> serialize() const;
    static CmaesTrainer deserialize(std::span<const std::uint8_t> bytes);

private:
    CmaesTrainer() = default;

    world::WorldConfig wcfg_;
    CmaesConfig cfg_;
    std::uint64_t seed_ = 0;
    Rng rng_{0};
    std::vector<CmaState> states_;       // one per founder family
    FitnessStage stage_ = FitnessStage::CumulativeFamily;
    std::int64_t generation_ = 0;
    std::vector<double> best_so_far_;
    std::vector<std::vector<double>> best_params_;
};

} // namespace evogrid::cmaes
