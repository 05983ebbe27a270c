#include "evogrid/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evogrid/analytics.hpp"
#include "evogrid/cmaes.hpp"
#include "evogrid/common.hpp"
#include "evogrid/config.hpp"
#include "evogrid/evdn.hpp"
#include "evogrid/io.hpp"
#include "evogrid/render.hpp"

namespace evogrid::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_out(const std::string& dir) {
    fs::path p(dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("EVOGRID_OUT_ROOT")) p = fs::path(root) / p;
    }
    return p;
}

void write_run_json(const fs::path& dir, const config::RunConfig& cfg,
                    const std::string& command, const json& extra = json::object()) {
    json j;
    j["command"] = command;
    j["config_hash"] = cfg.config_hash();
    j["seed"] = cfg.seed;
    j["env_seed_rule"] = "world seed = derive_seed(seed, 0xe0000 + env_index, episode_index)";
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream f(dir / "run.json");
    f << j.dump(2) << "\n";
}

fs::path prepare_run_dir(const config::RunConfig& cfg, const std::string& out_override,
                         const std::string& command) {
    const std::string dir_name = !out_override.empty() ? out_override
                                 : !cfg.out_dir.empty() ? cfg.out_dir
                                                        : std::string("evogrid-run");
    const fs::path dir = resolve_out(dir_name);
    fs::create_directories(dir);
    config::save_run_config(cfg, dir / "config.json");
    write_run_json(dir, cfg, command);
    return dir;
}

std::vector<neural::QNetwork> load_pool(const fs::path& dir, int expected,
                                        const neural::ArchSpec& arch) {
    std::vector<neural::QNetwork> nets;
    for (int i = 0; i < expected; ++i) {
        const fs::path p = dir / ("policy_" + std::to_string(i) + ".evgn");
        if (!fs::exists(p))
            throw ConfigError("pool: missing checkpoint " + p.string());
        nets.push_back(io::load_network(p));
        if (!(nets.back().spec() == arch))
            throw ConfigError("architecture mismatch between checkpoint " + p.string() +
                              " and config");
    }
    return nets;
}

std::vector<const neural::QNetwork*> net_ptrs(const std::vector<neural::QNetwork>& nets) {
    std::vector<const neural::QNetwork*> p;
    p.reserve(nets.size());
    for (const auto& n : nets) p.push_back(&n);
    return p;
}

void save_trainer_checkpoint(const evdn::Trainer& trainer, const fs::path& dir) {
    const auto blob = trainer.serialize();
    io::write_file(dir / "trainer.evgt", blob);
    for (int p = 0; p < trainer.pool().size(); ++p)
        io::save_network(trainer.pool().nets[static_cast<std::size_t>(p)],
                         dir / ("policy_" + std::to_string(p) + ".evgn"));
}

int cmd_train_evdn(const std::string& config_path, const std::string& out_override,
                   bool resume, bool quiet) {
    config::RunConfig cfg = config::load_run_config(config_path);
    if (cfg.world.reproduction == world::Reproduction::Sexual && cfg.trainer.policy_count != 1)
        throw ConfigError("sexual environment uses a single policy (trainer.policies = 1)");
    const fs::path dir = prepare_run_dir(cfg, out_override, "train-evdn");

    std::optional<evdn::Trainer> trainer;
    bool resumed = false;
    if (resume && fs::exists(dir / "trainer.evgt")) {
        const auto blob = io::read_file(dir / "trainer.evgt");
        trainer.emplace(evdn::Trainer::deserialize(blob));
        resumed = true;
    } else {
        trainer.emplace(cfg.world, cfg.reward, cfg.trainer, cfg.seed);
    }

    std::ofstream metrics(dir / "metrics.csv",
                          resumed ? std::ios::app : std::ios::trunc);
    if (!resumed) {
        metrics << "# config_hash=" << cfg.config_hash() << " seed=" << cfg.seed << "\n";
        metrics << "tick,epsilon,experiences,loss,population,births,deaths_starvation,"
                   "deaths_age,deaths_attack,attacks_intra,attacks_inter,episodes\n";
    }

    try {
        while (trainer->global_tick() < cfg.trainer.total_ticks) {
            const auto st = trainer->step();
            metrics << st.tick << "," << st.epsilon << "," << st.experiences << ","
                    << st.loss << "," << st.population << "," << st.births << ","
                    << st.deaths_starvation << "," << st.deaths_age << ","
                    << st.deaths_attack << "," << st.attacks_intra << ","
                    << st.attacks_inter << "," << st.episodes_completed << "\n";
            metrics.flush();
            const bool last = trainer->global_tick() >= cfg.trainer.total_ticks;
            if (trainer->global_tick() % cfg.trainer.checkpoint_every == 0 || last)
                save_trainer_checkpoint(*trainer, dir);
            if (!quiet && trainer->global_tick() % 500 == 0)
                std::cerr << "tick " << trainer->global_tick() << " pop " << st.population
                          << " loss " << st.loss << " eps " << st.epsilon << "\n";
        }
    } catch (const NumericError& e) {
        json dump;
        dump["error"] = e.what();
        dump["tick"] = trainer->global_tick();
        dump["experiences"] = trainer->total_experiences();
        std::ofstream f(dir / "nan_dump.json");
        f << dump.dump(2) << "\n";
        throw;
    }
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_train_cmaes(const std::string& config_path, const std::string& out_override,
                    bool resume) {
    config::RunConfig cfg = config::load_run_config(config_path);
    cfg.cmaes.validate(); // rejects LargeMlp up front
    const fs::path dir = prepare_run_dir(cfg, out_override, "train-cmaes");

    std::optional<cmaes::CmaesTrainer> trainer;
    bool resumed = false;
    if (resume && fs::exists(dir / "cmaes.evgc")) {
        const auto blob = io::read_file(dir / "cmaes.evgc");
        trainer.emplace(cmaes::CmaesTrainer::deserialize(blob));
        resumed = true;
    } else {
        trainer.emplace(cfg.world, cfg.cmaes, cfg.seed);
    }

    std::ofstream metrics(dir / "cmaes_metrics.csv",
                          resumed ? std::ios::app : std::ios::trunc);
    if (!resumed) {
        metrics << "# config_hash=" << cfg.config_hash() << " seed=" << cfg.seed << "\n";
        metrics << "generation,stage,family,mean_fitness,best_fitness,best_so_far,"
                   "median_min_births\n";
    }

    const auto save = [&]() {
        io::write_file(dir / "cmaes.evgc", trainer->serialize());
        for (std::size_t f = 0; f < trainer->best_params().size(); ++f) {
            if (trainer->best_params()[f].empty()) continue;
            neural::QNetwork net(cfg.cmaes.arch, 0);
            std::copy(trainer->best_params()[f].begin(), trainer->best_params()[f].end(),
                      net.mutable_parameters().begin());
            io::save_network(net, dir / ("best_policy_" + std::to_string(f) + ".evgn"));
        }
    };

    while (trainer->generation() < cfg.cmaes.generations) {
        const auto st = trainer->run_generation();
        for (std::size_t f = 0; f < st.mean_fitness.size(); ++f)
            metrics << st.generation << ","
                    << (st.stage == cmaes::FitnessStage::CumulativeFamily ? "cumulative"
                                                                          : "final")
                    << "," << f << "," << st.mean_fitness[f] << "," << st.best_fitness[f]
                    << "," << st.best_so_far[f] << "," << st.median_min_births << "\n";
        metrics.flush();
        const bool last = trainer->generation() >= cfg.cmaes.generations;
        if (trainer->generation() % cfg.cmaes.checkpoint_every == 0 || last) save();
        std::cerr << "generation " << trainer->generation() << " stage "
                  << (trainer->stage() == cmaes::FitnessStage::CumulativeFamily ? 1 : 2)
                  << " best " << st.best_fitness[0] << "\n";
    }
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& pool_dir,
             int episodes, int length, double epsilon, const std::string& out_dir,
             bool record, bool events) {
    config::RunConfig cfg = config::load_run_config(config_path);
    const fs::path dir = resolve_out(out_dir.empty() ? "eval-out" : out_dir);
    fs::create_directories(dir);

    const int pool_size = cfg.world.reproduction == world::Reproduction::Sexual
                              ? 1
                              : cfg.trainer.policy_count;
    std::vector<neural::QNetwork> nets;
    if (epsilon < 1.0)
        nets = load_pool(resolve_out(pool_dir), pool_size, cfg.trainer.arch);
    const auto ptrs = net_ptrs(nets);

    analytics::EvalConfig ecfg;
    ecfg.episodes = episodes;
    ecfg.length = length;
    ecfg.epsilon = epsilon;
    ecfg.threads = cfg.trainer.threads;
    ecfg.record = record;
    const auto summary = analytics::evaluate(cfg.world, ptrs, ecfg, cfg.seed);

    const std::string hash = cfg.config_hash();
    analytics::write_eval_ticks_csv(dir / "eval_ticks.csv", summary, hash, cfg.seed);
    analytics::write_eval_episodes_csv(dir / "eval_episodes.csv", summary, hash, cfg.seed);

    json j;
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    j["episodes"] = episodes;
    j["length"] = length;
    j["epsilon"] = epsilon;
    j["seeds"] = summary.seeds;
    j["mean_population"] = {{"mean", summary.mean_population.mean},
                            {"ci95_half_width", summary.mean_population.half_width}};
    j["final_population"] = {{"mean", summary.final_population.mean},
                             {"ci95_half_width", summary.final_population.half_width}};
    j["births"] = {{"mean", summary.births.mean},
                   {"ci95_half_width", summary.births.half_width}};
    j["survival_rate"] = summary.survival_rate;
    std::ofstream sf(dir / "eval_summary.json");
    sf << j.dump(2) << "\n";

    if (record) {
        fs::create_directories(dir / "episodes");
        for (std::size_t ep = 0; ep < summary.data.size(); ++ep)
            io::save_episode_log(summary.data[ep].log,
                                 dir / "episodes" /
                                     ("episode_" + std::to_string(ep) + ".evge"));
    }
    if (events) {
        // Re-run episode 0 writing the per-tick event stream.
        std::ofstream ef(dir / "events.jsonl");
        world::WorldConfig wc = cfg.world;
        wc.seed = derive_seed(summary.seeds[0], 0x1d, 0);
        Rng act_rng(derive_seed(summary.seeds[0], 0xac, 1));
        world::World w(wc);
        std::vector<std::int32_t> assignment(static_cast<std::size_t>(wc.founder_count), 0);
        if (ptrs.size() > 1)
            for (int f = 0; f < wc.founder_count; ++f)
                assignment[static_cast<std::size_t>(f)] = f;
        if (!assignment.empty()) w.remap_policy_slots(assignment);
        neural::Workspace ws;
        for (int t = 0; t < length && !w.extinct(); ++t) {
            world::ActionMap actions;
            for (const auto& a : w.agents()) {
                world::Action action;
                if (epsilon >= 1.0)
                    action = evdn::act({}, 1.0, act_rng);
                else
                    action = evdn::act(
                        ptrs[static_cast<std::size_t>(a.policy_slot)]->forward(
                            w.observe(a.id), ws),
                        epsilon, act_rng);
                actions.emplace(a.id, action);
            }
            const auto ev = w.step(actions);
            io::append_events_jsonl(ef, ev);
        }
    }
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_headtohead(const std::string& config_path, const std::vector<std::string>& net_paths,
                   int episodes, int length, const std::string& out_dir) {
    if (net_paths.size() != 4)
        throw ConfigError("headtohead: exactly 4 --net checkpoints required "
                          "(2 per pool, one per founder genome)");
    config::RunConfig cfg = config::load_run_config(config_path);
    const fs::path dir = resolve_out(out_dir.empty() ? "headtohead-out" : out_dir);
    fs::create_directories(dir);

    std::vector<neural::QNetwork> nets;
    for (const auto& p : net_paths) {
        nets.push_back(io::load_network(resolve_out(p)));
        if (!(nets.back().spec() == cfg.trainer.arch))
            throw ConfigError("architecture mismatch between checkpoint " + p +
                              " and config");
    }
    const auto ptrs = net_ptrs(nets);
    const auto result = analytics::head_to_head(cfg.world, ptrs, episodes, length,
                                                cfg.seed, cfg.trainer.threads);

    const std::string hash = cfg.config_hash();
    analytics::write_headtohead_csv(dir / "headtohead.csv", result, hash, cfg.seed);
    json j;
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    j["episodes"] = episodes;
    j["episode_seeds"] = result.seeds;
    j["pool_a_mean_final"] = analytics::normal_ci(result.pool_a_final).mean;
    j["pool_b_mean_final"] = analytics::normal_ci(result.pool_b_final).mean;
    j["final_gap_z"] = result.final_gap.z;
    j["final_gap_significant"] = result.final_gap.significant;
    std::ofstream sf(dir / "headtohead_summary.json");
    sf << j.dump(2) << "\n";
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& pool_dir,
               std::uint32_t family, int episodes, int length, const std::string& out_dir) {
    config::RunConfig cfg = config::load_run_config(config_path);
    const fs::path dir = resolve_out(out_dir.empty() ? "ablate-out" : out_dir);
    fs::create_directories(dir);
    const int pool_size = cfg.world.reproduction == world::Reproduction::Sexual
                              ? 1
                              : cfg.trainer.policy_count;
    const auto nets = load_pool(resolve_out(pool_dir), pool_size, cfg.trainer.arch);
    const auto ptrs = net_ptrs(nets);
    const auto result = analytics::ablate_intra_family_attacks(
        cfg.world, ptrs, family, episodes, length, cfg.seed, cfg.trainer.threads);

    const std::string hash = cfg.config_hash();
    analytics::write_ablation_csv(dir / "ablate.csv", result, hash, cfg.seed);
    json j;
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    j["family"] = family;
    j["episodes"] = episodes;
    j["episode_seeds"] = result.seeds;
    j["masked_arm_intra_attacks"] = result.masked_arm_intra_attacks;
    j["masked_arm_blocked_events"] = result.masked_arm_blocked_events;
    j["final_masked"] = {{"mean", result.final_masked.mean},
                         {"ci95_half_width", result.final_masked.half_width}};
    j["final_unmasked"] = {{"mean", result.final_unmasked.mean},
                           {"ci95_half_width", result.final_unmasked.half_width}};
    std::ofstream sf(dir / "ablate_summary.json");
    sf << j.dump(2) << "\n";
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_drift(const std::string& config_path, const std::string& pool_dir, int episodes,
              int length, const std::string& out_dir) {
    config::RunConfig cfg = config::load_run_config(config_path);
    const fs::path dir = resolve_out(out_dir.empty() ? "drift-out" : out_dir);
    fs::create_directories(dir);
    const int pool_size = cfg.world.reproduction == world::Reproduction::Sexual
                              ? 1
                              : cfg.trainer.policy_count;
    const auto nets = load_pool(resolve_out(pool_dir), pool_size, cfg.trainer.arch);
    const auto ptrs = net_ptrs(nets);
    const auto result = analytics::kin_masking_drift(cfg.world, ptrs, episodes, length,
                                                     cfg.seed, cfg.trainer.threads);
    const std::string hash = cfg.config_hash();
    analytics::write_drift_csv(dir / "drift.csv", result, hash, cfg.seed);
    json j;
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    j["episodes"] = episodes;
    j["length"] = length;
    j["episode_seeds"] = result.seeds;
    std::ofstream sf(dir / "drift_summary.json");
    sf << j.dump(2) << "\n";
    std::cout << dir.string() << "\n";
    return 0;
}

int cmd_render(const std::string& run_dir, int episode, const std::string& format,
               const std::string& out_dir, int cell_size) {
    const fs::path log_path = resolve_out(run_dir) / "episodes" /
                              ("episode_" + std::to_string(episode) + ".evge");
    if (!fs::exists(log_path))
        throw ConfigError("render: no recorded episode log at " + log_path.string() +
                          " (run eval with --record first)");
    const auto log = io::load_episode_log(log_path);
    const fs::path dir = resolve_out(out_dir.empty() ? "frames" : out_dir);
    const render::Format fmt =
        format == "ppm" ? render::Format::Pixmap : render::Format::Text;
    const int frames = render::render_episode(log, dir, fmt, cell_size);
    std::cout << frames << " frames -> " << dir.string() << "\n";
    return 0;
}

int cmd_cmaes_selftest(int dim, int generations, std::uint64_t seed) {
    int used = 0;
    const double best = cmaes::sphere_self_test(dim, generations, seed, &used);
    std::cout << "sphere d=" << dim << " best=" << best << " generations=" << used << "\n";
    if (best < 1e-8) return 0;
    std::cerr << "self-test failed to reach 1e-8\n";
    throw NumericError("cmaes self-test did not converge");
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"evogrid: evolutionary multi-agent grid worlds, E-VDN and CMA-ES "
                 "training, and population analytics"};
    app.require_subcommand(1);

    std::string config_path, out_dir, pool_dir, run_dir, format = "text";
    std::vector<std::string> net_paths;
    bool resume = false, quiet = false, record = false, events = false;
    int episodes = 20, length = 500, cell_size = 8, dim = 20, generations = 200;
    int episode_index = 0;
    std::uint64_t family = 0, selftest_seed = 7;
    double epsilon = 0.0;

    auto* train = app.add_subcommand("train-evdn", "Train policies with E-VDN");
    train->add_option("-c,--config", config_path, "Run config (JSON)")->required();
    train->add_option("-o,--out", out_dir, "Output directory override");
    train->add_flag("--resume", resume, "Resume from the latest checkpoint");
    train->add_flag("-q,--quiet", quiet, "Suppress progress lines");

    auto* cma = app.add_subcommand("train-cmaes", "Train the CMA-ES baseline");
    cma->add_option("-c,--config", config_path, "Run config (JSON)")->required();
    cma->add_option("-o,--out", out_dir, "Output directory override");
    cma->add_flag("--resume", resume, "Resume from the latest checkpoint");

    auto* ev = app.add_subcommand("eval", "Greedy test episodes with aggregated metrics");
    ev->add_option("-c,--config", config_path)->required();
    ev->add_option("--pool", pool_dir, "Run directory holding policy_<i>.evgn");
    ev->add_option("--episodes", episodes);
    ev->add_option("--length", length);
    ev->add_option("--epsilon", epsilon, "1.0 = uniform-random baseline (no pool needed)");
    ev->add_option("-o,--out", out_dir);
    ev->add_flag("--record", record, "Record episode logs for rendering");
    ev->add_flag("--events", events, "Dump episode 0 events as JSONL");

    auto* h2h = app.add_subcommand("headtohead", "2v2 family competition");
    h2h->add_option("-c,--config", config_path)->required();
    h2h->add_option("--net", net_paths, "4 checkpoints: a0 a1 b0 b1");
    h2h->add_option("--episodes", episodes)->default_val(90);
    h2h->add_option("--length", length);
    h2h->add_option("-o,--out", out_dir);

    auto* ab = app.add_subcommand("ablate", "Paired runs voiding one family's intra-family attacks");
    ab->add_option("-c,--config", config_path)->required();
    ab->add_option("--pool", pool_dir)->required();
    ab->add_option("--family", family)->required();
    ab->add_option("--episodes", episodes)->default_val(90);
    ab->add_option("--length", length);
    ab->add_option("-o,--out", out_dir);

    auto* dr = app.add_subcommand("drift", "Allele entropy with and without kin detection");
    dr->add_option("-c,--config", config_path)->required();
    dr->add_option("--pool", pool_dir)->required();
    dr->add_option("--episodes", episodes);
    dr->add_option("--length", length);
    dr->add_option("-o,--out", out_dir);

    auto* re = app.add_subcommand("render", "Replay a recorded episode as frames");
    re->add_option("--run", run_dir, "Eval output directory")->required();
    re->add_option("--episode", episode_index);
    re->add_option("--format", format)->check(CLI::IsMember({"text", "ppm"}));
    re->add_option("--cell-size", cell_size);
    re->add_option("-o,--out", out_dir);

    auto* st = app.add_subcommand("cmaes-selftest", "Sphere-function convergence check");
    st->add_option("--dim", dim);
    st->add_option("--generations", generations);
    st->add_option("--seed", selftest_seed);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train_evdn(config_path, out_dir, resume, quiet);
        if (cma->parsed()) return cmd_train_cmaes(config_path, out_dir, resume);
        if (ev->parsed())
            return cmd_eval(config_path, pool_dir, episodes, length, epsilon, out_dir,
                            record, events);
        if (h2h->parsed())
            return cmd_headtohead(config_path, net_paths, episodes, length, out_dir);
        if (ab->parsed())
            return cmd_ablate(config_path, pool_dir, static_cast<std::uint32_t>(family),
                              episodes, length, out_dir);
        if (dr->parsed()) return cmd_drift(config_path, pool_dir, episodes, length, out_dir);
        if (re->parsed())
            return cmd_render(run_dir, episode_index, format, out_dir, cell_size);
        if (st->parsed()) return cmd_cmaes_selftest(dim, generations, selftest_seed);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace evogrid::cli
