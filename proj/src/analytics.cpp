#include "evogrid/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evogrid/common.hpp"
#include "evogrid/evdn.hpp"

namespace evogrid::analytics {

namespace {

constexpr double kZCritical95 = 1.959963984540054;

void run_parallel(int jobs, int threads, const std::function<void(int)>& fn) {
#ifdef _OPENMP
    if (threads != 1) {
        const int requested = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(requested)
        for (int j = 0; j < jobs; ++j) fn(j);
        return;
    }
#else
    (void)threads;
#endif
    for (int j = 0; j < jobs; ++j) fn(j);
}

std::ofstream open_artifact(const std::filesystem::path& path,
                            const std::string& config_hash, std::uint64_t seed) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open artifact for writing: " + path.string());
    f << "# config_hash=" << config_hash << " seed=" << seed << "\n";
    return f;
}

} // namespace

double allele_entropy(const world::World& w) {
    if (w.extinct()) throw std::domain_error("allele_entropy: empty census");
    std::unordered_map<std::uint32_t, std::int64_t> counts;
    std::int64_t total = 0;
    for (const auto& a : w.agents())
        for (std::uint32_t allele : a.genome.alleles) {
            counts[allele] += 1;
            total += 1;
        }
    double h = 0.0;
    for (const auto& [allele, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

std::vector<double> family_sizes(const world::World& w, int founder_count) {
    std::vector<double> sizes(static_cast<std::size_t>(founder_count), 0.0);
    for (const auto& a : w.agents()) {
        const double per_pos = 1.0 / static_cast<double>(a.genome.size());
        for (std::uint32_t allele : a.genome.alleles)
            if (allele < sizes.size()) sizes[allele] += per_pos;
    }
    return sizes;
}

TickMetrics collect_tick_metrics(const world::World& post_tick,
                                 const world::TickEvents& ev, int founder_count) {
    TickMetrics m;
    m.tick = ev.tick;
    m.population = static_cast<int>(post_tick.agents().size());
    m.births = static_cast<int>(ev.births.size());
    double lifespan_sum = 0.0;
    for (const auto& d : ev.deaths) {
        lifespan_sum += d.age;
        switch (d.cause) {
            case world::TickEvents::DeathCause::Starvation: m.deaths_starvation++; break;
            case world::TickEvents::DeathCause::OldAge: m.deaths_age++; break;
            case world::TickEvents::DeathCause::Attack: m.deaths_attack++; break;
        }
    }
    const int died = m.deaths_starvation + m.deaths_age + m.deaths_attack;
    m.mean_lifespan_dying = died > 0 ? lifespan_sum / died : 0.0;

    double cannibal_age = 0.0, victim_age = 0.0;
    int cannibal_kills = 0;
    for (const auto& a : ev.attacks) {
        if (a.blocked) {
            m.attacks_blocked++;
            continue;
        }
        if (a.kinship == 1.0) {
            m.attacks_intra++;
            if (a.lethal) {
                cannibal_age += a.attacker_age;
                victim_age += a.victim_age;
                cannibal_kills++;
            }
        } else {
            m.attacks_inter++;
        }
    }
    m.mean_cannibal_age = cannibal_kills > 0 ? cannibal_age / cannibal_kills : 0.0;
    m.mean_victim_age = cannibal_kills > 0 ? victim_age / cannibal_kills : 0.0;
    m.family = family_sizes(post_tick, founder_count);
    m.entropy = post_tick.extinct() ? 0.0 : allele_entropy(post_tick);
    return m;
}

EpisodeData run_episode(const EpisodeSpec& spec,
                        std::span<const neural::QNetwork* const> nets,
                        std::int64_t track_family) {
    world::WorldConfig cfg = spec.wcfg;
    cfg.seed = derive_seed(spec.seed, 0x1d, 0);
    Rng act_rng(derive_seed(spec.seed, 0xac, 1));

    world::World w(cfg);
    if (!spec.assignment.empty())
        w.remap_policy_slots(spec.assignment);

    EpisodeData out;
    out.seed = spec.seed;
    if (track_family >= 0) out.intra_attacks_on_family = 0;
    if (spec.record) {
        out.log.config = cfg;
        out.log.assignment = spec.assignment;
    }

    const int founders = cfg.founder_count;
    auto push_census = [&]() {
        out.population.push_back(static_cast<int>(w.agents().size()));
        out.family.push_back(family_sizes(w, founders));
        out.entropy.push_back(w.extinct() ? std::numeric_limits<double>::quiet_NaN()
                                          : allele_entropy(w));
    };
    push_census();

    neural::Workspace ws;
    double pop_sum = 0.0;
    double lifespan_sum = 0.0;
    int died = 0;
    for (int t = 0; t < spec.length; ++t) {
        if (w.extinct()) break;
        world::ActionMap actions;
        std::vector<std::pair<world::AgentId, std::uint8_t>> recorded;
        for (const auto& a : w.agents()) {
            world::Action action;
            if (spec.epsilon >= 1.0) {
                action = evdn::act({}, 1.0, act_rng);
            } else {
                const auto* net = nets[static_cast<std::size_t>(a.policy_slot)];
                action = evdn::act(net->forward(w.observe(a.id), ws), spec.epsilon, act_rng);
            }
            actions.emplace(a.id, action);
            if (spec.record)
                recorded.emplace_back(a.id, static_cast<std::uint8_t>(action.index()));
        }
        if (spec.record) out.log.actions.push_back(std::move(recorded));
        const auto ev = w.step(actions);

        push_census();
        pop_sum += static_cast<double>(w.agents().size());
        out.births += static_cast<int>(ev.births.size());
        for (const auto& d : ev.deaths) {
            lifespan_sum += d.age;
            ++died;
            switch (d.cause) {
                case world::TickEvents::DeathCause::Starvation: out.deaths_starvation++; break;
                case world::TickEvents::DeathCause::OldAge: out.deaths_age++; break;
                case world::TickEvents::DeathCause::Attack: out.deaths_attack++; break;
            }
        }
        for (const auto& at : ev.attacks) {
            if (at.blocked) {
                out.attacks_blocked++;
                continue;
            }
            if (at.kinship == 1.0) {
                out.attacks_intra++;
                if (track_family >= 0 &&
                    at.attacker_family == static_cast<std::uint32_t>(track_family))
                    out.intra_attacks_on_family++;
            } else {
                out.attacks_inter++;
            }
        }
    }
    out.mean_population = spec.length > 0 ? pop_sum / spec.length : 0.0;
    out.mean_lifespan = died > 0 ? lifespan_sum / died : 0.0;
    out.survived = !w.extinct();
    return out;
}

Ci normal_ci(std::span<const double> xs) {
    Ci ci;
    ci.n = static_cast<int>(xs.size());
    if (ci.n == 0) return ci;
    double sum = 0.0;
    for (double x : xs) sum += x;
    ci.mean = sum / ci.n;
    if (ci.n < 2) return ci;
    double ss = 0.0;
    for (double x : xs) ss += (x - ci.mean) * (x - ci.mean);
    const double sd = std::sqrt(ss / (ci.n - 1));
    ci.half_width = kZCritical95 * sd / std::sqrt(static_cast<double>(ci.n));
    return ci;
}

PairedTest paired_z_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty())
        throw std::domain_error("paired_z_test: need equal nonempty samples");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const Ci ci = normal_ci(d);
    PairedTest t;
    if (ci.half_width == 0.0) {
        t.z = 0.0; // all differences identical; a zero gap is not significant
        t.significant = ci.mean != 0.0;
        return t;
    }
    t.z = ci.mean / (ci.half_width / kZCritical95);
    t.significant = std::abs(t.z) > kZCritical95;
    return t;
}

EvalSummary evaluate(const world::WorldConfig& wcfg,
                     std::span<const neural::QNetwork* const> nets,
                     const EvalConfig& cfg, std::uint64_t base_seed) {
    if (cfg.epsilon < 1.0) {
        if (nets.empty()) throw ConfigError("evaluate: empty policy pool");
        if (nets.size() != 1 &&
            static_cast<int>(nets.size()) != wcfg.founder_count)
            throw ConfigError("evaluate: pool size must be 1 or founder_count");
    }
    EvalSummary s;
    s.data.resize(static_cast<std::size_t>(cfg.episodes));
    s.seeds.resize(static_cast<std::size_t>(cfg.episodes));

    std::vector<std::int32_t> assignment(static_cast<std::size_t>(wcfg.founder_count), 0);
    if (nets.size() > 1)
        for (int f = 0; f < wcfg.founder_count; ++f)
            assignment[static_cast<std::size_t>(f)] = f;

    run_parallel(cfg.episodes, cfg.threads, [&](int ep) {
        EpisodeSpec spec;
        spec.wcfg = wcfg;
        spec.assignment = assignment;
        spec.epsilon = cfg.epsilon;
        spec.length = cfg.length;
        spec.seed = derive_seed(base_seed, 0xeba1, static_cast<std::uint64_t>(ep));
        spec.record = cfg.record;
        s.data[static_cast<std::size_t>(ep)] = run_episode(spec, nets);
        s.seeds[static_cast<std::size_t>(ep)] = spec.seed;
    });

    std::vector<double> mean_pop, final_pop, births;
    int survived = 0;
    for (const auto& d : s.data) {
        mean_pop.push_back(d.mean_population);
        final_pop.push_back(static_cast<double>(d.population.back()));
        births.push_back(static_cast<double>(d.births));
        survived += d.survived ? 1 : 0;
    }
    s.mean_population = normal_ci(mean_pop);
    s.final_population = normal_ci(final_pop);
    s.births = normal_ci(births);
    s.survival_rate = static_cast<double>(survived) / cfg.episodes;

    s.mean_pop_series.assign(static_cast<std::size_t>(cfg.length) + 1, 0.0);
    for (const auto& d : s.data)
        for (std::size_t t = 0; t < s.mean_pop_series.size(); ++t)
            s.mean_pop_series[t] +=
                (t < d.population.size() ? d.population[t] : 0) /
                static_cast<double>(cfg.episodes);
    return s;
}

HeadToHeadResult head_to_head(const world::WorldConfig& wcfg,
                              std::span<const neural::QNetwork* const> nets4,
                              int episodes, int length, std::uint64_t seed, int threads) {
    if (nets4.size() != 4)
        throw ConfigError("head_to_head: exactly 4 (checkpoint, genome) pairs required");
    world::WorldConfig cfg = wcfg;
    cfg.founder_count = 4;
    cfg.reproduction = world::Reproduction::Asexual;
    cfg.genome_length = 1;

    HeadToHeadResult r;
    std::vector<EpisodeData> data(static_cast<std::size_t>(episodes));
    r.seeds.resize(static_cast<std::size_t>(episodes));
    run_parallel(episodes, threads, [&](int ep) {
        EpisodeSpec spec;
        spec.wcfg = cfg;
        spec.assignment = {0, 1, 2, 3};
        spec.epsilon = 0.0;
        spec.length = length;
        spec.seed = derive_seed(seed, 0x4244, static_cast<std::uint64_t>(ep));
        data[static_cast<std::size_t>(ep)] = run_episode(spec, nets4);
        r.seeds[static_cast<std::size_t>(ep)] = spec.seed;
    });

    // Extinct episodes are padded with zero-size rows so every (episode,
    // tick, family) cell exists.
    for (int ep = 0; ep < episodes; ++ep) {
        const auto& d = data[static_cast<std::size_t>(ep)];
        for (int t = 0; t <= length; ++t)
            for (int f = 0; f < 4; ++f) {
                const double size =
                    static_cast<std::size_t>(t) < d.family.size()
                        ? d.family[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)]
                        : 0.0;
                r.rows.push_back({ep, t, f, size});
            }
        const bool full = d.family.size() == static_cast<std::size_t>(length) + 1;
        const auto& last = d.family.back();
        r.pool_a_final.push_back(full ? last[0] + last[1] : 0.0);
        r.pool_b_final.push_back(full ? last[2] + last[3] : 0.0);
    }
    r.final_gap = paired_z_test(r.pool_a_final, r.pool_b_final);
    return r;
}

AblationResult ablate_intra_family_attacks(const world::WorldConfig& wcfg,
                                           std::span<const neural::QNetwork* const> nets,
                                           std::uint32_t family, int episodes, int length,
                                           std::uint64_t seed, int threads) {
    if (family >= static_cast<std::uint32_t>(wcfg.founder_count))
        throw ConfigError("ablate: family index out of range");
    AblationResult r;
    std::vector<EpisodeData> plain(static_cast<std::size_t>(episodes));
    std::vector<EpisodeData> masked(static_cast<std::size_t>(episodes));
    r.seeds.resize(static_cast<std::size_t>(episodes));

    std::vector<std::int32_t> assignment(static_cast<std::size_t>(wcfg.founder_count), 0);
    if (nets.size() > 1)
        for (int f = 0; f < wcfg.founder_count; ++f)
            assignment[static_cast<std::size_t>(f)] = f;

    run_parallel(episodes * 2, threads, [&](int j) {
        const int ep = j / 2;
        const bool mask = (j % 2) == 1;
        EpisodeSpec spec;
        spec.wcfg = wcfg;
        if (mask) spec.wcfg.blocked_family = family;
        spec.assignment = assignment;
        spec.epsilon = 0.0;
        spec.length = length;
        spec.seed = derive_seed(seed, 0xab1a7e, static_cast<std::uint64_t>(ep));
        auto& out = mask ? masked[static_cast<std::size_t>(ep)]
                         : plain[static_cast<std::size_t>(ep)];
        out = run_episode(spec, nets, static_cast<std::int64_t>(family));
        if (!mask) r.seeds[static_cast<std::size_t>(ep)] = spec.seed;
    });

    std::vector<double> final_masked, final_plain;
    const auto family_at = [&](const EpisodeData& d, int t) {
        return static_cast<std::size_t>(t) < d.family.size()
                   ? d.family[static_cast<std::size_t>(t)][family]
                   : 0.0;
    };
    for (int ep = 0; ep < episodes; ++ep) {
        const auto& pd = plain[static_cast<std::size_t>(ep)];
        const auto& md = masked[static_cast<std::size_t>(ep)];
        for (int t = 0; t <= length; ++t) {
            r.rows.push_back({0, ep, t, family_at(pd, t)});
            r.rows.push_back({1, ep, t, family_at(md, t)});
        }
        final_plain.push_back(family_at(pd, length));
        final_masked.push_back(family_at(md, length));
        r.masked_arm_intra_attacks += md.intra_attacks_on_family;
        r.masked_arm_blocked_events += md.attacks_blocked;
    }
    r.final_masked = normal_ci(final_masked);
    r.final_unmasked = normal_ci(final_plain);
    return r;
}

DriftResult kin_masking_drift(const world::WorldConfig& wcfg,
                              std::span<const neural::QNetwork* const> nets,
                              int episodes, int length, std::uint64_t seed, int threads) {
    DriftResult r;
    std::vector<EpisodeData> arm0(static_cast<std::size_t>(episodes));
    std::vector<EpisodeData> arm1(static_cast<std::size_t>(episodes));
    r.seeds.resize(static_cast<std::size_t>(episodes));

    std::vector<std::int32_t> assignment(static_cast<std::size_t>(wcfg.founder_count), 0);
    if (nets.size() > 1)
        for (int f = 0; f < wcfg.founder_count; ++f)
            assignment[static_cast<std::size_t>(f)] = f;

    run_parallel(episodes * 2, threads, [&](int j) {
        const int ep = j / 2;
        const bool mask = (j % 2) == 1;
        EpisodeSpec spec;
        spec.wcfg = wcfg;
        spec.wcfg.mask_kinship = mask;
        spec.assignment = assignment;
        spec.epsilon = 0.0;
        spec.length = length;
        spec.seed = derive_seed(seed, 0xd1f7, static_cast<std::uint64_t>(ep));
        auto& out = mask ? arm1[static_cast<std::size_t>(ep)]
                         : arm0[static_cast<std::size_t>(ep)];
        out = run_episode(spec, nets);
        if (!mask) r.seeds[static_cast<std::size_t>(ep)] = spec.seed;
    });

    for (int ep = 0; ep < episodes; ++ep)
        for (int arm = 0; arm < 2; ++arm) {
            const auto& d = (arm == 0 ? arm0 : arm1)[static_cast<std::size_t>(ep)];
            for (std::size_t t = 0; t < d.entropy.size(); ++t) {
                if (std::isnan(d.entropy[t])) break; // extinct from here on
                r.rows.push_back({arm, ep, static_cast<int>(t), d.entropy[t]});
            }
        }
    return r;
}

RandomDriftOutcome run_random_drift_episode(const world::WorldConfig& wcfg,
                                            std::uint64_t seed, std::int64_t max_ticks) {
    world::WorldConfig cfg = wcfg;
    cfg.seed = derive_seed(seed, 0x1d, 0);
    Rng act_rng(derive_seed(seed, 0xac, 1));
    world::World w(cfg);

    RandomDriftOutcome out;
    out.entropy_at_start = allele_entropy(w);
    for (std::int64_t t = 0; t < max_ticks; ++t) {
        if (w.extinct()) {
            out.extinct = true;
            break;
        }
        if (allele_entropy(w) == 0.0) {
            out.reached_zero_entropy = true;
            break;
        }
        w.step(world::random_actions(w, act_rng));
        out.ticks += 1;
    }
    if (!out.extinct && !out.reached_zero_entropy && !w.extinct() &&
        allele_entropy(w) == 0.0)
        out.reached_zero_entropy = true;
    return out;
}

// ---- CSV artifacts ----------------------------------------------------------

void write_eval_ticks_csv(const std::filesystem::path& path, const EvalSummary& s,
                          const std::string& config_hash, std::uint64_t seed) {
    auto f = open_artifact(path, config_hash, seed);
    f << "episode,tick,population\n";
    for (std::size_t ep = 0; ep < s.data.size(); ++ep)
        for (std::size_t t = 0; t < s.data[ep].population.size(); ++t)
            f << ep << "," << t << "," << s.data[ep].population[t] << "\n";
}

void write_eval_episodes_csv(const std::filesystem::path& path, const EvalSummary& s,
                             const std::string& config_hash, std::uint64_t seed) {
    auto f = open_artifact(path, config_hash, seed);
    f << "episode,seed,mean_population,final_population,survived,births,mean_lifespan\n";
    for (std::size_t ep = 0; ep < s.data.size(); ++ep) {
        const auto& d = s.data[ep];
        f << ep << "," << d.seed << "," << d.mean_population << ","
          << d.population.back() << "," << (d.survived ? 1 : 0) << "," << d.births << ","
          << d.mean_lifespan << "\n";
    }
}

void write_headtohead_csv(const std::filesystem::path& path, const HeadToHeadResult& r,
                          const std::string& config_hash, std::uint64_t seed) {
    auto f = open_artifact(path, config_hash, seed);
    f << "episode,tick,family,size\n";
    for (const auto& row : r.rows)
        f << row.episode << "," << row.tick << "," << row.family << "," << row.size << "\n";
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& r,
                        const std::string& config_hash, std::uint64_t seed) {
    auto f = open_artifact(path, config_hash, seed);
    f << "arm,episode,tick,family_size\n";
    for (const auto& row : r.rows)
        f << row.arm << "," << row.episode << "," << row.tick << "," << row.family_size
          << "\n";
}

void write_drift_csv(const std::filesystem::path& path, const DriftResult& r,
                     const std::string& config_hash, std::uint64_t seed) {
    auto f = open_artifact(path, config_hash, seed);
    f << "arm,episode,tick,entropy\n";
    for (const auto& row : r.rows)
        f << row.arm << "," << row.episode << "," << row.tick << "," << row.entropy << "\n";
}

} // namespace evogrid::analytics
