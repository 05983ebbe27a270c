#include "evogrid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evogrid/common.hpp"
#include "evogrid/io.hpp"

namespace evogrid::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& what) {
    throw ConfigError(origin + ": " + (path.empty() ? "config" : path) + ": " + what);
}

void check_keys(const json& j, const std::string& origin, const std::string& path,
                const std::set<std::string>& known) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) fail(origin, path, "unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const std::string& origin, const std::string& path,
          const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        fail(origin, path + "." + key, e.what());
    }
}

int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

world::WorldConfig parse_world(const json& j, const std::string& origin) {
    world::WorldConfig w;
    const std::string path = "world";
    check_keys(j, origin, path,
               {"width", "height", "endowment", "initial_health", "fertility_start",
                "fertility_end", "longevity", "food_growth_rate", "food_capacity",
                "genome_length", "reproduction", "founder_count", "food_layout",
                "mask_kinship", "count_soft_cap", "blocked_family"});
    read(j, origin, path, "width", w.width);
    read(j, origin, path, "height", w.height);
    read(j, origin, path, "endowment", w.endowment);
    read(j, origin, path, "initial_health", w.initial_health);
    read(j, origin, path, "fertility_start", w.fertility_start);
    read(j, origin, path, "fertility_end", w.fertility_end);
    read(j, origin, path, "longevity", w.longevity);
    read(j, origin, path, "food_growth_rate", w.food_growth_rate);
    read(j, origin, path, "food_capacity", w.food_capacity);
    read(j, origin, path, "genome_length", w.genome_length);
    read(j, origin, path, "founder_count", w.founder_count);
    read(j, origin, path, "mask_kinship", w.mask_kinship);
    read(j, origin, path, "count_soft_cap", w.count_soft_cap);
    if (auto it = j.find("reproduction"); it != j.end()) {
        const std::string v = it->get<std::string>();
        if (v == "asexual")
            w.reproduction = world::Reproduction::Asexual;
        else if (v == "sexual")
            w.reproduction = world::Reproduction::Sexual;
        else
            fail(origin, path + ".reproduction", "expected 'asexual' or 'sexual'");
    }
    if (auto it = j.find("food_layout"); it != j.end()) {
        check_keys(*it, origin, path + ".food_layout", {"kind", "density"});
        std::string kind = "uniform_random";
        read(*it, origin, path + ".food_layout", "kind", kind);
        if (kind == "uniform_random")
            w.food_layout.kind = world::FoodLayout::Kind::UniformRandom;
        else if (kind == "all")
            w.food_layout.kind = world::FoodLayout::Kind::All;
        else if (kind == "none")
            w.food_layout.kind = world::FoodLayout::Kind::None;
        else
            fail(origin, path + ".food_layout.kind",
                 "expected 'uniform_random', 'all' or 'none'");
        read(*it, origin, path + ".food_layout", "density", w.food_layout.density);
    }
    if (auto it = j.find("blocked_family"); it != j.end() && !it->is_null())
        w.blocked_family = it->get<std::uint32_t>();
    return w;
}

neural::ArchSpec parse_arch(const json& j, const std::string& origin,
                            const std::string& path) {
    neural::ArchSpec a;
    check_keys(j, origin, path, {"kind", "hidden", "conv_filters", "conv_dense"});
    std::string kind = "small_conv";
    read(j, origin, path, "kind", kind);
    if (kind == "large_mlp")
        a.kind = neural::ArchKind::LargeMlp;
    else if (kind == "small_conv")
        a.kind = neural::ArchKind::SmallConv;
    else
        fail(origin, path + ".kind", "expected 'large_mlp' or 'small_conv'");
    if (auto it = j.find("hidden"); it != j.end()) {
        const auto v = it->get<std::vector<std::int32_t>>();
        if (v.size() != 3) fail(origin, path + ".hidden", "expected exactly 3 widths");
        a.mlp_hidden = {v[0], v[1], v[2]};
    }
    read(j, origin, path, "conv_filters", a.conv_filters);
    read(j, origin, path, "conv_dense", a.conv_dense);
    return a;
}

kinrew::RewardConfig parse_reward(const json& j, const std::string& origin) {
    kinrew::RewardConfig r;
    check_keys(j, origin, "reward", {"gamma", "epsilon", "r_b", "kind"});
    read(j, origin, "reward", "gamma", r.gamma);
    read(j, origin, "reward", "epsilon", r.epsilon);
    read(j, origin, "reward", "r_b", r.r_b);
    if (auto it = j.find("kind"); it != j.end()) {
        const std::string v = it->get<std::string>();
        if (v == "evolutionary")
            r.kind = kinrew::RewardKind::Evolutionary;
        else if (v == "sugary")
            r.kind = kinrew::RewardKind::Sugary;
        else
            fail(origin, "reward.kind", "expected 'evolutionary' or 'sugary'");
    }
    if (!(r.gamma >= 0.0 && r.gamma < 1.0))
        fail(origin, "reward.gamma", "must be in [0,1)");
    if (!(r.epsilon > 0.0)) fail(origin, "reward.epsilon", "must be positive");
    return r;
}

evdn::TrainerConfig parse_trainer(const json& j, const std::string& origin) {
    evdn::TrainerConfig t;
    check_keys(j, origin, "trainer",
               {"envs", "policies", "train_len_min", "train_len_max", "test_len",
                "eps_start", "eps_end", "eps_decay_ticks", "optimizer", "learning_rate",
                "total_ticks", "checkpoint_every", "threads", "architecture"});
    read(j, origin, "trainer", "envs", t.env_count);
    read(j, origin, "trainer", "policies", t.policy_count);
    read(j, origin, "trainer", "train_len_min", t.train_len_min);
    read(j, origin, "trainer", "train_len_max", t.train_len_max);
    read(j, origin, "trainer", "test_len", t.test_len);
    read(j, origin, "trainer", "eps_start", t.eps_start);
    read(j, origin, "trainer", "eps_end", t.eps_end);
    read(j, origin, "trainer", "eps_decay_ticks", t.eps_decay_ticks);
    read(j, origin, "trainer", "learning_rate", t.optimizer.learning_rate);
    read(j, origin, "trainer", "total_ticks", t.total_ticks);
    read(j, origin, "trainer", "checkpoint_every", t.checkpoint_every);
    read(j, origin, "trainer", "threads", t.threads);
    if (auto it = j.find("optimizer"); it != j.end()) {
        const std::string v = it->get<std::string>();
        if (v == "adam")
            t.optimizer.kind = neural::OptimizerKind::Adam;
        else if (v == "sgd")
            t.optimizer.kind = neural::OptimizerKind::Sgd;
        else
            fail(origin, "trainer.optimizer", "expected 'adam' or 'sgd'");
    }
    if (auto it = j.find("architecture"); it != j.end())
        t.arch = parse_arch(*it, origin, "trainer.architecture");
    return t;
}

cmaes::CmaesConfig parse_cmaes(const json& j, const std::string& origin) {
    cmaes::CmaesConfig c;
    check_keys(j, origin, "cmaes",
               {"lambda", "sigma0", "episodes_per_eval", "episode_length",
                "stage_switch_births", "generations", "checkpoint_every", "threads",
                "frozen_eval_seeds", "architecture"});
    read(j, origin, "cmaes", "lambda", c.lambda);
    read(j, origin, "cmaes", "sigma0", c.sigma0);
    read(j, origin, "cmaes", "episodes_per_eval", c.episodes_per_eval);
    read(j, origin, "cmaes", "episode_length", c.episode_length);
    read(j, origin, "cmaes", "stage_switch_births", c.stage_switch_births);
    read(j, origin, "cmaes", "generations", c.generations);
    read(j, origin, "cmaes", "checkpoint_every", c.checkpoint_every);
    read(j, origin, "cmaes", "threads", c.threads);
    read(j, origin, "cmaes", "frozen_eval_seeds", c.frozen_eval_seeds);
    if (auto it = j.find("architecture"); it != j.end())
        c.arch = parse_arch(*it, origin, "cmaes.architecture");
    return c;
}

json arch_to_json(const neural::ArchSpec& a) {
    json j;
    j["kind"] = a.kind == neural::ArchKind::LargeMlp ? "large_mlp" : "small_conv";
    j["hidden"] = {a.mlp_hidden[0], a.mlp_hidden[1], a.mlp_hidden[2]};
    j["conv_filters"] = a.conv_filters;
    j["conv_dense"] = a.conv_dense;
    return j;
}

} // namespace

std::string RunConfig::canonical_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    json w;
    w["width"] = world.width;
    w["height"] = world.height;
    w["endowment"] = world.endowment;
    w["initial_health"] = world.initial_health;
    w["fertility_start"] = world.fertility_start;
    w["fertility_end"] = world.fertility_end;
    w["longevity"] = world.longevity;
    w["food_growth_rate"] = world.food_growth_rate;
    w["food_capacity"] = world.food_capacity;
    w["genome_length"] = world.genome_length;
    w["reproduction"] =
        world.reproduction == world::Reproduction::Asexual ? "asexual" : "sexual";
    w["founder_count"] = world.founder_count;
    w["food_layout"] = {
        {"kind", world.food_layout.kind == world::FoodLayout::Kind::UniformRandom
                     ? "uniform_random"
                     : (world.food_layout.kind == world::FoodLayout::Kind::All ? "all"
                                                                               : "none")},
        {"density", world.food_layout.density}};
    w["mask_kinship"] = world.mask_kinship;
    w["count_soft_cap"] = world.count_soft_cap;
    if (world.blocked_family)
        w["blocked_family"] = *world.blocked_family;
    else
        w["blocked_family"] = nullptr;
    j["world"] = w;
    j["reward"] = {
        {"gamma", reward.gamma},
        {"epsilon", reward.epsilon},
        {"r_b", reward.r_b},
        {"kind", reward.kind == kinrew::RewardKind::Evolutionary ? "evolutionary" : "sugary"}};
    j["trainer"] = {{"envs", trainer.env_count},
                    {"policies", trainer.policy_count},
                    {"train_len_min", trainer.train_len_min},
                    {"train_len_max", trainer.train_len_max},
                    {"test_len", trainer.test_len},
                    {"eps_start", trainer.eps_start},
                    {"eps_end", trainer.eps_end},
                    {"eps_decay_ticks", trainer.eps_decay_ticks},
                    {"optimizer", trainer.optimizer.kind == neural::OptimizerKind::Adam
                                      ? "adam"
                                      : "sgd"},
                    {"learning_rate", trainer.optimizer.learning_rate},
                    {"total_ticks", trainer.total_ticks},
                    {"checkpoint_every", trainer.checkpoint_every},
                    {"threads", trainer.threads},
                    {"architecture", arch_to_json(trainer.arch)}};
    j["cmaes"] = {{"lambda", cmaes.lambda},
                  {"sigma0", cmaes.sigma0},
                  {"episodes_per_eval", cmaes.episodes_per_eval},
                  {"episode_length", cmaes.episode_length},
                  {"stage_switch_births", cmaes.stage_switch_births},
                  {"generations", cmaes.generations},
                  {"checkpoint_every", cmaes.checkpoint_every},
                  {"threads", cmaes.threads},
                  {"frozen_eval_seeds", cmaes.frozen_eval_seeds},
                  {"architecture", arch_to_json(cmaes.arch)}};
    return j.dump(2);
}

std::string RunConfig::config_hash() const {
    return io::hash_hex(io::fnv1a64(canonical_json()));
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ":" + std::to_string(line_of_byte(text, e.byte)) +
                          ": " + e.what());
    }
    RunConfig cfg;
    check_keys(j, origin, "", {"seed", "out_dir", "world", "reward", "trainer", "cmaes"});
    read(j, origin, "", "seed", cfg.seed);
    read(j, origin, "", "out_dir", cfg.out_dir);
    if (auto it = j.find("world"); it != j.end()) cfg.world = parse_world(*it, origin);
    if (auto it = j.find("reward"); it != j.end()) cfg.reward = parse_reward(*it, origin);
    if (auto it = j.find("trainer"); it != j.end()) cfg.trainer = parse_trainer(*it, origin);
    if (auto it = j.find("cmaes"); it != j.end()) cfg.cmaes = parse_cmaes(*it, origin);
    try {
        cfg.world.validate();
        cfg.trainer.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write config copy: " + path.string());
    f << cfg.canonical_json() << "\n";
}

} // namespace evogrid::config
