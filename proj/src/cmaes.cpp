#include "evogrid/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evogrid/common.hpp"
#include "evogrid/evdn.hpp"
#include "evogrid/io.hpp"

namespace evogrid::cmaes {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double draw_normal(Rng& rng) {
    // Box-Muller, cosine branch only: deterministic two draws per variate.
    const double u1 = 1.0 - rng.uniform_real(); // (0, 1]
    const double u2 = rng.uniform_real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

constexpr double kEigenvalueFloor = 1e-20;

} // namespace

int default_lambda(int dim) {
    return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

CmaState::CmaState(Eigen::VectorXd initial_mean, double sigma0, int lambda)
    : mean_(std::move(initial_mean)), sigma_(sigma0) {
    const int n = dim();
    if (n < 1) throw ConfigError("cma: dimension must be >= 1");
    if (!(sigma0 > 0.0)) throw ConfigError("cma: sigma0 must be positive");
    lambda_ = lambda > 0 ? lambda : default_lambda(n);
    if (lambda_ < 2) lambda_ = 2;
    mu_ = lambda_ / 2;

    weights_.resize(mu_);
    for (int i = 0; i < mu_; ++i)
        weights_[i] = std::log(lambda_ / 2.0 + 0.5) - std::log(static_cast<double>(i + 1));
    weights_ /= weights_.sum();
    mu_eff_ = 1.0 / weights_.squaredNorm();

    const double nd = static_cast<double>(n);
    cc_ = (4.0 + mu_eff_ / nd) / (nd + 4.0 + 2.0 * mu_eff_ / nd);
    cs_ = (mu_eff_ + 2.0) / (nd + mu_eff_ + 5.0);
    c1_ = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                   ((nd + 2.0) * (nd + 2.0) + mu_eff_));
    damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (nd + 1.0)) - 1.0) + cs_;
    chi_n_ = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

    C_ = Eigen::MatrixXd::Identity(n, n);
    B_ = Eigen::MatrixXd::Identity(n, n);
    D_ = Eigen::VectorXd::Ones(n);
    pc_ = Eigen::VectorXd::Zero(n);
    ps_ = Eigen::VectorXd::Zero(n);
}

std::vector<Eigen::VectorXd> CmaState::sample(Rng& rng) {
    const int n = dim();
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(static_cast<std::size_t>(lambda_));
    Eigen::VectorXd z(n);
    for (int k = 0; k < lambda_; ++k) {
        for (int i = 0; i < n; ++i) z[i] = D_[i] * draw_normal(rng);
        xs.push_back(mean_ + sigma_ * (B_ * z));
    }
    return xs;
}

void CmaState::refresh_eigensystem() {
    // Enforce symmetry before decomposing; accumulated rank updates drift.
    C_ = (C_ + C_.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C_);
    Eigen::VectorXd evals = solver.eigenvalues();
    for (int i = 0; i < evals.size(); ++i) {
        if (!(evals[i] > kEigenvalueFloor)) {
            evals[i] = kEigenvalueFloor;
            ++repairs_; // non-positive-definite repair, surfaced in telemetry
        }
    }
    B_ = solver.eigenvectors();
    D_ = evals.cwiseSqrt();
    last_eigen_evals_ = evals_;
}

void CmaState::update(const std::vector<Eigen::VectorXd>& xs,
                      const std::vector<double>& losses) {
    const int n = dim();
    if (static_cast<int>(xs.size()) != lambda_ || losses.size() != xs.size())
        throw std::domain_error("cma update: need exactly lambda evaluated candidates");

    // Rank candidates; ties resolved by lexicographic comparison so the
    // update is invariant to input permutation.
    std::vector<int> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (losses[static_cast<std::size_t>(a)] != losses[static_cast<std::size_t>(b)])
            return losses[static_cast<std::size_t>(a)] < losses[static_cast<std::size_t>(b)];
        const auto& xa = xs[static_cast<std::size_t>(a)];
        const auto& xb = xs[static_cast<std::size_t>(b)];
        for (int i = 0; i < n; ++i)
            if (xa[i] != xb[i]) return xa[i] < xb[i];
        return false;
    });

    const Eigen::VectorXd old_mean = mean_;
    std::vector<Eigen::VectorXd> y(static_cast<std::size_t>(mu_));
    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu_; ++i) {
        y[static_cast<std::size_t>(i)] =
            (xs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] - old_mean) /
            sigma_;
        y_w += weights_[i] * y[static_cast<std::size_t>(i)];
    }
    mean_ = old_mean + sigma_ * y_w;

    // C^{-1/2} y_w through the cached eigensystem.
    Eigen::VectorXd c_inv_sqrt_yw = B_ * (B_.transpose() * y_w).cwiseQuotient(D_);
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mu_eff_) * c_inv_sqrt_yw;

    evals_ += lambda_;
    const double ps_norm = ps_.norm();
    const double expected = std::sqrt(
        1.0 - std::pow(1.0 - cs_, 2.0 * static_cast<double>(evals_) / lambda_));
    const bool hsig = ps_norm / expected / chi_n_ < 1.4 + 2.0 / (n + 1.0);

    pc_ = (1.0 - cc_) * pc_ +
          (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mu_eff_) : 0.0) * y_w;

    // (1-hsig) correction keeps the covariance scale when the step path is
    // stalled; it applies to the old C.
    const double old_scale =
        (1.0 - c1_ - cmu_) + (hsig ? 0.0 : c1_ * cc_ * (2.0 - cc_));
    C_ *= old_scale;
    C_.noalias() += c1_ * (pc_ * pc_.transpose());
    for (int i = 0; i < mu_; ++i)
        C_.noalias() += cmu_ * weights_[i] *
                        (y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)].transpose());

    sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));
    generation_ += 1;

    // Lazy eigensystem refresh (Hansen's cadence).
    const double gap = static_cast<double>(lambda_) / (c1_ + cmu_) / n / 10.0;
    if (static_cast<double>(evals_ - last_eigen_evals_) > gap) refresh_eigensystem();
}

std::vector<std::uint8_t> CmaState::serialize() const {
    io::BinaryWriter out;
    const int n = dim();
    out.i32(n);
    out.i32(lambda_);
    out.i64(generation_);
    out.i64(evals_);
    out.i64(last_eigen_evals_);
    out.i64(repairs_);
    out.f64(sigma_);
    for (int i = 0; i < n; ++i) out.f64(mean_[i]);
    for (int i = 0; i < n; ++i) out.f64(pc_[i]);
    for (int i = 0; i < n; ++i) out.f64(ps_[i]);
    for (int i = 0; i < n; ++i) out.f64(D_[i]);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.f64(C_(i, j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.f64(B_(i, j));
    return out.bytes();
}

CmaState CmaState::deserialize(std::span<const std::uint8_t> bytes) {
    io::BinaryReader r(bytes);
    const int n = r.i32();
    const int lambda = r.i32();
    CmaState st(Eigen::VectorXd::Zero(n), 1.0, lambda);
    st.generation_ = r.i64();
    st.evals_ = r.i64();
    st.last_eigen_evals_ = r.i64();
    st.repairs_ = r.i64();
    st.sigma_ = r.f64();
    for (int i = 0; i < n; ++i) st.mean_[i] = r.f64();
    for (int i = 0; i < n; ++i) st.pc_[i] = r.f64();
    for (int i = 0; i < n; ++i) st.ps_[i] = r.f64();
    for (int i = 0; i < n; ++i) st.D_[i] = r.f64();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) st.C_(i, j) = r.f64();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) st.B_(i, j) = r.f64();
    return st;
}

double sphere_self_test(int dim, int max_generations, std::uint64_t seed,
                        int* generations_used) {
    Rng rng(seed);
    Eigen::VectorXd start = Eigen::VectorXd::Constant(dim, 1.0);
    // Population 16: the default 4+3*ln(d) lands at ~210 generations on the
    // 20-D sphere, just past the 200-generation budget this check runs under.
    CmaState st(start, 0.5, std::max(16, default_lambda(dim)));
    double best = start.squaredNorm();
    for (int g = 0; g < max_generations; ++g) {
        const auto xs = st.sample(rng);
        std::vector<double> losses(xs.size());
        for (std::size_t k = 0; k < xs.size(); ++k) losses[k] = xs[k].squaredNorm();
        for (double l : losses) best = std::min(best, l);
        if (best < 1e-8) {
            if (generations_used) *generations_used = g + 1;
            return best;
        }
        st.update(xs, losses);
    }
    if (generations_used) *generations_used = max_generations;
    return best;
}

void CmaesConfig::validate() const {
    if (arch.kind == neural::ArchKind::LargeMlp)
        throw ConfigError("parameter count exceeds CMA-ES guard (memory grows "
                          "quadratically; use SmallConv)");
    arch.validate();
    if (episodes_per_eval < 1) throw ConfigError("cmaes: episodes_per_eval must be >= 1");
    if (episode_length < 1) throw ConfigError("cmaes: episode_length must be >= 1");
    if (!(sigma0 > 0.0)) throw ConfigError("cmaes: sigma0 must be positive");
    if (generations < 0) throw ConfigError("cmaes: generations must be >= 0");
}

std::vector<double> evaluate_candidate_episode(
    const world::WorldConfig& wcfg, const neural::ArchSpec& arch,
    const std::vector<std::vector<double>>& candidate_params, FitnessStage stage,
    int length, std::uint64_t seed, std::vector<double>* births_per_family) {
    const int families = wcfg.founder_count;
    if (static_cast<int>(candidate_params.size()) != families)
        throw ConfigError("evaluate_candidate_episode: one candidate per founder required");

    std::vector<neural::QNetwork> nets;
    nets.reserve(candidate_params.size());
    for (const auto& p : candidate_params) {
        neural::QNetwork net(arch, 0);
        if (p.size() != static_cast<std::size_t>(net.param_count()))
            throw ConfigError("evaluate_candidate_episode: parameter size mismatch");
        std::copy(p.begin(), p.end(), net.mutable_parameters().begin());
        nets.push_back(std::move(net));
    }

    world::WorldConfig cfg = wcfg;
    cfg.seed = seed;
    world::World w(cfg);

    std::vector<double> cumulative(static_cast<std::size_t>(families), 0.0);
    std::vector<double> final_size(static_cast<std::size_t>(families), 0.0);
    std::vector<double> births(static_cast<std::size_t>(families), 0.0);

    auto census = [&](std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (const auto& a : w.agents()) {
            const std::uint32_t fam = a.genome.alleles[0];
            if (fam < out.size()) out[fam] += 1.0;
        }
    };

    std::vector<double> sizes(static_cast<std::size_t>(families), 0.0);
    census(sizes);
    for (int f = 0; f < families; ++f) cumulative[static_cast<std::size_t>(f)] += sizes[static_cast<std::size_t>(f)];

    neural::Workspace ws;
    for (int t = 0; t < length && !w.extinct(); ++t) {
        world::ActionMap actions;
        for (const auto& a : w.agents()) {
            const auto q = nets[static_cast<std::size_t>(a.policy_slot)].forward(
                w.observe(a.id), ws);
            actions.emplace(a.id, world::Action::from_index(neural::greedy_action(q)));
        }
        const auto ev = w.step(actions);
        census(sizes);
        for (int f = 0; f < families; ++f)
            cumulative[static_cast<std::size_t>(f)] += sizes[static_cast<std::size_t>(f)];
        for (const auto& b : ev.births) {
            const world::AgentState* child = w.find(b.child);
            if (child) {
                const std::uint32_t fam = child->genome.alleles[0];
                if (fam < births.size()) births[fam] += 1.0;
            }
        }
    }
    census(final_size);

    if (births_per_family) *births_per_family = births;
    return stage == FitnessStage::CumulativeFamily ? cumulative : final_size;
}

CmaesTrainer::CmaesTrainer(const world::WorldConfig& wcfg, const CmaesConfig& cfg,
                           std::uint64_t seed)
    : wcfg_(wcfg), cfg_(cfg), seed_(seed), rng_(derive_seed(seed, 0xc3a, 0)) {
    wcfg_.validate();
    cfg_.validate();
    if (wcfg_.reproduction != world::Reproduction::Asexual)
        throw ConfigError("cmaes: the baseline applies to the asexual environment only");
    const int families = wcfg_.founder_count;
    const int d = static_cast<int>(cfg_.arch.param_count());
    for (int f = 0; f < families; ++f) {
        neural::QNetwork init(cfg_.arch, derive_seed(seed, 0xc3a1, static_cast<std::uint64_t>(f)));
        Eigen::VectorXd m(d);
        for (int i = 0; i < d; ++i) m[i] = init.parameters()[static_cast<std::size_t>(i)];
        states_.emplace_back(std::move(m), cfg_.sigma0, cfg_.lambda);
    }
    best_so_far_.assign(static_cast<std::size_t>(families),
                        -std::numeric_limits<double>::infinity());
    best_params_.resize(static_cast<std::size_t>(families));
}

GenerationStats CmaesTrainer::run_generation() {
    const int families = wcfg_.founder_count;
    const int lambda = states_[0].lambda();
    const int reps = cfg_.episodes_per_eval;

    // Sample lambda candidates per family (shared generation index pairing:
    // candidate k of every family plays in the same episodes).
    std::vector<std::vector<Eigen::VectorXd>> samples;
    samples.reserve(static_cast<std::size_t>(families));
    for (auto& st : states_) samples.push_back(st.sample(rng_));

    struct EpisodeOut {
        std::vector<double> fitness;
        std::vector<double> births;
        double min_births = 0.0;
    };
    std::vector<EpisodeOut> episodes(static_cast<std::size_t>(lambda * reps));

    const auto run_one = [&](int k, int rep) {
        std::vector<std::vector<double>> params(static_cast<std::size_t>(families));
        for (int f = 0; f < families; ++f) {
            const auto& v = samples[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)];
            params[static_cast<std::size_t>(f)].assign(v.data(), v.data() + v.size());
        }
        const std::uint64_t ep_seed =
            cfg_.frozen_eval_seeds
                ? derive_seed(seed_, 0xe9, static_cast<std::uint64_t>(k * reps + rep))
                : derive_seed(seed_, 0xe9 + static_cast<std::uint64_t>(generation_ + 1),
                              static_cast<std::uint64_t>(k * reps + rep));
        EpisodeOut out;
        out.fitness = evaluate_candidate_episode(wcfg_, cfg_.arch, params, stage_,
                                                 cfg_.episode_length, ep_seed, &out.births);
        out.min_births = *std::min_element(out.births.begin(), out.births.end());
        episodes[static_cast<std::size_t>(k * reps + rep)] = std::move(out);
    };

    const int jobs = lambda * reps;
#ifdef _OPENMP
    if (cfg_.threads != 1) {
        const int requested = cfg_.threads > 0 ? cfg_.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(requested)
        for (int j = 0; j < jobs; ++j) run_one(j / reps, j % reps);
    } else {
        for (int j = 0; j < jobs; ++j) run_one(j / reps, j % reps);
    }
#else
    for (int j = 0; j < jobs; ++j) run_one(j / reps, j % reps);
#endif

    GenerationStats stats;
    stats.generation = generation_;
    stats.stage = stage_;
    stats.mean_fitness.assign(static_cast<std::size_t>(families), 0.0);
    stats.best_fitness.assign(static_cast<std::size_t>(families),
                              -std::numeric_limits<double>::infinity());

    // Candidate fitness = mean over its episodes; CMA minimizes the negative.
    for (int f = 0; f < families; ++f) {
        std::vector<double> losses(static_cast<std::size_t>(lambda), 0.0);
        for (int k = 0; k < lambda; ++k) {
            double fit = 0.0;
            for (int rep = 0; rep < reps; ++rep)
                fit += episodes[static_cast<std::size_t>(k * reps + rep)]
                           .fitness[static_cast<std::size_t>(f)];
            fit /= reps;
            losses[static_cast<std::size_t>(k)] = -fit;
            stats.mean_fitness[static_cast<std::size_t>(f)] += fit / lambda;
            if (fit > stats.best_fitness[static_cast<std::size_t>(f)])
                stats.best_fitness[static_cast<std::size_t>(f)] = fit;
            if (fit > best_so_far_[static_cast<std::size_t>(f)]) {
                best_so_far_[static_cast<std::size_t>(f)] = fit;
                const auto& v = samples[static_cast<std::size_t>(f)][static_cast<std::size_t>(k)];
                best_params_[static_cast<std::size_t>(f)].assign(v.data(), v.data() + v.size());
            }
        }
        states_[static_cast<std::size_t>(f)].update(samples[static_cast<std::size_t>(f)], losses);
    }
    stats.best_so_far = best_so_far_;

    // Stage switch: once the median episode produces at least the configured
    // number of births in every family, fitness moves to final family size.
    if (stage_ == FitnessStage::CumulativeFamily) {
        std::vector<double> min_births(episodes.size());
        for (std::size_t i = 0; i < episodes.size(); ++i) min_births[i] = episodes[i].min_births;
        std::sort(min_births.begin(), min_births.end());
        const double median = min_births[min_births.size() / 2];
        stats.median_min_births = median;
        if (median >= cfg_.stage_switch_births) {
            stage_ = FitnessStage::FinalFamily;
            stats.switched_stage = true;
        }
    }

    generation_ += 1;
    return stats;
}

std::vector<std::uint8_t> CmaesTrainer::serialize() const {
    io::BinaryWriter out;
    out.u32(0x43475645); // "EVGC"
    out.u32(1);
    io::write_world_config(out, wcfg_);
    out.i32(cfg_.lambda);
    out.f64(cfg_.sigma0);
    out.i32(cfg_.episodes_per_eval);
    out.i32(cfg_.episode_length);
    out.f64(cfg_.stage_switch_births);
    out.i64(cfg_.generations);
    out.i64(cfg_.checkpoint_every);
    out.i32(cfg_.threads);
    out.u8(cfg_.frozen_eval_seeds ? 1 : 0);
    out.u8(static_cast<std::uint8_t>(cfg_.arch.kind));
    out.i32(cfg_.arch.mlp_hidden[0]);
    out.i32(cfg_.arch.mlp_hidden[1]);
    out.i32(cfg_.arch.mlp_hidden[2]);
    out.i32(cfg_.arch.conv_filters);
    out.i32(cfg_.arch.conv_dense);
    out.u64(seed_);
    out.str(rng_.save_state());
    out.u8(static_cast<std::uint8_t>(stage_));
    out.i64(generation_);
    out.u32(static_cast<std::uint32_t>(states_.size()));
    for (const auto& st : states_) {
        const auto blob = st.serialize();
        out.u64(blob.size());
        for (std::uint8_t b : blob) out.u8(b);
    }
    for (double b : best_so_far_) out.f64(b);
    for (const auto& p : best_params_) {
        out.u64(p.size());
        for (double x : p) out.f64(x);
    }
    return out.bytes();
}

CmaesTrainer CmaesTrainer::deserialize(std::span<const std::uint8_t> bytes) {
    io::BinaryReader r(bytes);
    if (r.u32() != 0x43475645) throw IoError("not a cmaes checkpoint");
    if (r.u32() != 1) throw IoError("unsupported cmaes checkpoint version");
    CmaesTrainer t;
    t.wcfg_ = io::read_world_config(r);
    t.cfg_.lambda = r.i32();
    t.cfg_.sigma0 = r.f64();
    t.cfg_.episodes_per_eval = r.i32();
    t.cfg_.episode_length = r.i32();
    t.cfg_.stage_switch_births = r.f64();
    t.cfg_.generations = r.i64();
    t.cfg_.checkpoint_every = r.i64();
    t.cfg_.threads = r.i32();
    t.cfg_.frozen_eval_seeds = r.u8() != 0;
    t.cfg_.arch.kind = static_cast<neural::ArchKind>(r.u8());
    t.cfg_.arch.mlp_hidden[0] = r.i32();
    t.cfg_.arch.mlp_hidden[1] = r.i32();
    t.cfg_.arch.mlp_hidden[2] = r.i32();
    t.cfg_.arch.conv_filters = r.i32();
    t.cfg_.arch.conv_dense = r.i32();
    t.seed_ = r.u64();
    t.rng_.load_state(r.str());
    t.stage_ = static_cast<FitnessStage>(r.u8());
    t.generation_ = r.i64();
    const std::uint32_t families = r.u32();
    for (std::uint32_t f = 0; f < families; ++f) {
        const std::uint64_t n = r.u64();
        std::vector<std::uint8_t> blob(n);
        for (auto& b : blob) b = r.u8();
        t.states_.push_back(CmaState::deserialize(blob));
    }
    t.best_so_far_.resize(families);
    for (auto& b : t.best_so_far_) b = r.f64();
    t.best_params_.resize(families);
    for (auto& p : t.best_params_) {
        const std::uint64_t n = r.u64();
        p.resize(n);
        for (auto& x : p) x = r.f64();
    }
    return t;
}

} // namespace evogrid::cmaes
