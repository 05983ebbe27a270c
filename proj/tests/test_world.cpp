#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "evogrid/analytics.hpp"
#include "evogrid/io.hpp"
#include "evogrid/world.hpp"
#include "scenario.hpp"

using namespace evogrid;
using scenario::agent;
using scenario::dirt_grid;
using scenario::micro_config;

TEST_SUITE_BEGIN("world");

TEST_CASE("default config spawns five endowed founders") {
    world::WorldConfig cfg; // paper defaults
    cfg.seed = 11;
    world::World w(cfg);
    REQUIRE(w.agents().size() == 5);
    std::set<std::uint32_t> alleles;
    for (const auto& a : w.agents()) {
        CHECK(a.food_stored == 10.0);
        CHECK(a.age == 0);
        CHECK(a.health == 2);
        CHECK(a.genome.size() == 1);
        alleles.insert(a.genome.alleles[0]);
    }
    CHECK(alleles.size() == 5); // unique genome per founder
    CHECK(scenario::occupancy_consistent(w));
}

TEST_CASE("single founder shares no alleles with anyone") {
    world::WorldConfig cfg;
    cfg.founder_count = 1;
    cfg.seed = 3;
    world::World w(cfg);
    REQUIRE(w.agents().size() == 1);
    CHECK(w.family_weight(w.agents()[0].id) == 1.0);
}

TEST_CASE("same seed gives byte-identical canonical snapshots") {
    world::WorldConfig cfg;
    cfg.seed = 77;
    world::World a(cfg);
    world::World b(cfg);
    CHECK(io::serialize_world(a) == io::serialize_world(b));
}

TEST_CASE("world too small for founders is a configuration error") {
    world::WorldConfig cfg;
    cfg.width = 2;
    cfg.height = 2;
    cfg.founder_count = 5;
    CHECK_THROWS_AS(world::World{cfg}, ConfigError);
}

TEST_CASE("config invariant violations are rejected") {
    world::WorldConfig cfg;
    cfg.fertility_start = 45;
    cfg.fertility_end = 40;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = world::WorldConfig{};
    cfg.food_growth_rate = 5.0; // above capacity 3
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = world::WorldConfig{};
    cfg.genome_length = 2; // asexual must be 1
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("moving onto a food tile harvests everything") {
    auto cfg = micro_config(5, 5);
    auto tiles = dirt_grid(5, 5);
    auto& src = tiles[2 * 5 + 3]; // (3,2)
    src.kind = world::TileKind::FoodSource;
    src.food = 3.0;
    auto w = world::World::custom(cfg, tiles, {agent(0, 2, 2, 10.0, 0)});

    auto actions = scenario::with_action({}, 0, {world::MoveDir::East, false});
    const auto ev = w.step(actions);
    const auto* a = w.find(0);
    REQUIRE(a != nullptr);
    CHECK(a->x == 3);
    CHECK(a->food_stored == 10.0 + 3.0 - 1.0); // harvest then eat
    // Emptied at harvest; only the end-of-tick growth remains.
    CHECK(w.tile_at(3, 2).food == doctest::Approx(0.15));
    REQUIRE(ev.harvests.size() == 1);
    CHECK(ev.harvests[0].amount == 3.0);
}

TEST_CASE("staying on a source tile also harvests") {
    auto cfg = micro_config(3, 3);
    auto tiles = dirt_grid(3, 3);
    tiles[1 * 3 + 1].kind = world::TileKind::FoodSource;
    tiles[1 * 3 + 1].food = 2.5;
    auto w = world::World::custom(cfg, tiles, {agent(0, 1, 1, 5.0, 0)});
    w.step(scenario::stay_all(w));
    CHECK(w.find(0)->food_stored == 5.0 + 2.5 - 1.0);
}

TEST_CASE("moves wrap toroidally") {
    world::WorldConfig cfg;
    cfg.seed = 5;
    cfg.fertility_start = 0;
    cfg.fertility_end = 0;
    cfg.food_layout.kind = world::FoodLayout::Kind::None;
    auto tiles = dirt_grid(50, 50);
    auto w = world::World::custom(cfg, tiles, {agent(0, 0, 7, 10.0, 0)});
    w.step(scenario::with_action({}, 0, {world::MoveDir::West, false}));
    CHECK(w.find(0)->x == 49);
    CHECK(w.find(0)->y == 7);
}

TEST_CASE("moving into an occupied tile is a no-op") {
    auto cfg = micro_config(4, 4);
    auto w = world::World::custom(cfg, dirt_grid(4, 4),
                                  {agent(0, 1, 1, 10.0, 0), agent(1, 2, 1, 10.0, 1)});
    world::ActionMap actions;
    actions[0] = {world::MoveDir::East, false}; // into agent 1
    actions[1] = {world::MoveDir::Stay, false};
    w.step(actions);
    CHECK(w.find(0)->x == 1);
    CHECK(w.find(1)->x == 2);
    CHECK(scenario::occupancy_consistent(w));
}

TEST_CASE("an agent at exactly one food starves after eating") {
    auto cfg = micro_config(4, 4);
    auto w = world::World::custom(cfg, dirt_grid(4, 4), {agent(0, 1, 1, 1.0, 0)});
    const auto ev = w.step(scenario::stay_all(w));
    CHECK(w.extinct());
    REQUIRE(ev.deaths.size() == 1);
    CHECK(ev.deaths[0].cause == world::TickEvents::DeathCause::Starvation);
    CHECK(ev.food_eaten == 1.0);
    CHECK(ev.food_destroyed == 0.0);
}

TEST_CASE("agents die past their longevity") {
    auto cfg = micro_config(4, 4);
    cfg.longevity = 3;
    cfg.fertility_end = 0;
    // Age 1 keeps the agent outside the [0,0] fertility window.
    auto w = world::World::custom(cfg, dirt_grid(4, 4), {agent(0, 1, 1, 100.0, 0, 1, 1)});
    world::TickEvents last;
    for (int t = 0; t < 3 && !w.extinct(); ++t) {
        CHECK(w.agents()[0].age <= cfg.longevity);
        last = w.step(scenario::stay_all(w));
    }
    CHECK(w.extinct());
    REQUIRE(last.deaths.size() == 1);
    CHECK(last.deaths[0].cause == world::TickEvents::DeathCause::OldAge);
    CHECK(last.deaths[0].age == 4);
    CHECK(last.food_destroyed == doctest::Approx(97.0)); // corpse food vanishes
}

TEST_CASE("attack drains one health point") {
    auto cfg = micro_config(5, 5);
    auto w = world::World::custom(
        cfg, dirt_grid(5, 5),
        {agent(0, 2, 2, 10.0, 0, 1, 0, 2), agent(1, 2, 3, 10.0, 1, 1, 0, 2)});
    world::ActionMap actions;
    actions[0] = {world::MoveDir::Stay, true};
    actions[1] = {world::MoveDir::Stay, false};
    const auto ev = w.step(actions);
    REQUIRE(ev.attacks.size() == 1);
    CHECK(!ev.attacks[0].lethal);
    CHECK(w.find(1)->health == 1);
}

TEST_CASE("lethal attack transfers half the victim's food") {
    auto cfg = micro_config(5, 5);
    // Victim eats 1 during its own phase; start at 9 so it holds 8 when hit.
    auto w = world::World::custom(
        cfg, dirt_grid(5, 5),
        {agent(0, 2, 2, 10.0, 0, 1, 0, 2), agent(1, 2, 3, 9.0, 1, 1, 0, 1)});
    world::ActionMap actions;
    actions[0] = {world::MoveDir::Stay, true};
    actions[1] = {world::MoveDir::Stay, false};
    const auto ev = w.step(actions);
    REQUIRE(ev.attacks.size() == 1);
    CHECK(ev.attacks[0].lethal);
    CHECK(ev.attacks[0].food_transferred == 4.0);
    CHECK(w.find(1) == nullptr);
    CHECK(w.find(0)->food_stored == 10.0 - 1.0 + 4.0);
    REQUIRE(ev.deaths.size() == 1);
    CHECK(ev.deaths[0].cause == world::TickEvents::DeathCause::Attack);
    CHECK(ev.food_destroyed == 4.0); // the other half
}

TEST_CASE("attack with no adjacent agent is a silent no-op") {
    auto cfg = micro_config(6, 6);
    auto w = world::World::custom(cfg, dirt_grid(6, 6), {agent(0, 1, 1, 10.0, 0)});
    const auto ev = w.step(scenario::with_action({}, 0, {world::MoveDir::Stay, true}));
    CHECK(ev.attacks.empty());
    CHECK(w.find(0) != nullptr);
}

TEST_CASE("newborns are not attack candidates on their birth tick") {
    // 3x1 strip: parent at 1, attacker at 2; the only empty tile is 0, so the
    // child's position is forced. The attacker's only non-newborn neighbor is
    // the parent.
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto cfg = micro_config(3, 1, seed);
        cfg.fertility_start = 0;
        cfg.fertility_end = 50;
        cfg.longevity = 100;
        auto w = world::World::custom(
            cfg, dirt_grid(3, 1),
            {agent(0, 1, 0, 25.0, 0, 1, 5, 2), agent(1, 2, 0, 5.0, 1, 1, 5, 2)});
        world::ActionMap actions;
        actions[0] = {world::MoveDir::Stay, false};
        actions[1] = {world::MoveDir::Stay, true};
        const auto ev = w.step(actions);
        REQUIRE(ev.births.size() == 1);
        CHECK(ev.births[0].x == 0);
        REQUIRE(ev.attacks.size() == 1);
        CHECK(ev.attacks[0].victim == 0); // always the parent, never the child
    }
}

TEST_CASE("asexual fertility threshold is strict") {
    auto make = [](double food) {
        auto cfg = micro_config(5, 5);
        cfg.fertility_start = 0;
        cfg.fertility_end = 10;
        return world::World::custom(cfg, dirt_grid(5, 5),
                                    {agent(0, 2, 2, food, 0, 1, 5)});
    };
    auto w1 = make(20.0); // exactly 2e: infertile
    CHECK(w1.step(scenario::stay_all(w1)).births.empty());
    auto w2 = make(20.01);
    const auto ev = w2.step(scenario::stay_all(w2));
    REQUIRE(ev.births.size() == 1);
    // Parent transfers e to the child, then eats.
    CHECK(w2.find(0)->food_stored == doctest::Approx(20.01 - 10.0 - 1.0));
    const auto* child = w2.find(ev.births[0].child);
    REQUIRE(child != nullptr);
    CHECK(child->food_stored == 10.0);
    CHECK(child->age == 0);
    CHECK(child->genome == w2.find(0)->genome);
    CHECK(child->policy_slot == w2.find(0)->policy_slot);
}

TEST_CASE("fertility age window is inclusive") {
    auto run_with_age = [](int age) {
        auto cfg = micro_config(5, 5);
        cfg.fertility_start = 5;
        cfg.fertility_end = 7;
        cfg.longevity = 50;
        auto w = world::World::custom(cfg, dirt_grid(5, 5),
                                      {agent(0, 2, 2, 30.0, 0, 1, age)});
        return w.step(scenario::stay_all(w)).births.size();
    };
    CHECK(run_with_age(4) == 0);
    CHECK(run_with_age(5) == 1);
    CHECK(run_with_age(7) == 1);
    CHECK(run_with_age(8) == 0);
}

TEST_CASE("sexual children always take exactly half of each parent's genes") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto cfg = micro_config(5, 5, seed);
        cfg.reproduction = world::Reproduction::Sexual;
        cfg.genome_length = 32;
        cfg.fertility_start = 0;
        cfg.fertility_end = 50;
        cfg.longevity = 100;
        auto w = world::World::custom(
            cfg, dirt_grid(5, 5),
            {agent(0, 2, 2, 12.0, 0, 32, 5), agent(1, 2, 3, 12.0, 1, 32, 5)});
        const auto ev = w.step(scenario::stay_all(w));
        REQUIRE(ev.births.size() == 1);
        const auto* child = w.find(ev.births[0].child);
        REQUIRE(child != nullptr);
        int zeros = 0;
        for (auto allele : child->genome.alleles) zeros += allele == 0 ? 1 : 0;
        CHECK(zeros == 16);
        CHECK(child->food_stored == 10.0);
    }
}

TEST_CASE("sexual parents each transfer half the endowment") {
    auto cfg = micro_config(5, 5, 9);
    cfg.reproduction = world::Reproduction::Sexual;
    cfg.genome_length = 32;
    cfg.fertility_start = 0;
    cfg.fertility_end = 50;
    cfg.longevity = 100;
    auto w = world::World::custom(
        cfg, dirt_grid(5, 5),
        {agent(0, 2, 2, 14.0, 0, 32, 5), agent(1, 2, 3, 14.0, 1, 32, 5)});
    const auto ev = w.step(scenario::stay_all(w));
    REQUIRE(ev.births.size() == 1);
    CHECK(w.find(0)->food_stored == doctest::Approx(14.0 - 5.0 - 1.0));
    CHECK(w.find(1)->food_stored == doctest::Approx(14.0 - 5.0 - 1.0));
    CHECK(w.find(ev.births[0].child)->food_stored == 10.0);
}

TEST_CASE("observation features and shape") {
    CHECK(world::Observation::kSize == 154);
    auto cfg = micro_config(9, 9);
    cfg.count_soft_cap = 100.0;
    auto tiles = dirt_grid(9, 9);
    tiles[4 * 9 + 5].kind = world::TileKind::FoodSource; // (5,4), east of agent
    tiles[4 * 9 + 5].food = 1.5;
    auto w = world::World::custom(cfg, tiles, {agent(0, 4, 4, 10.0, 0, 1, 10, 2)});
    const auto obs = w.observe(0);

    const int center = (2 * 5 + 2) * 6;
    CHECK(obs.data[center + 1] == 1.0);                    // occupied by self
    CHECK(obs.data[center + 4] == 1.0);                    // self-kinship
    CHECK(obs.data[center + 2] == doctest::Approx(10.0 / cfg.longevity));
    CHECK(obs.data[center + 3] == doctest::Approx(10.0 / 40.0));
    CHECK(obs.data[center + 5] == 1.0);                    // health / initial
    const int east = (2 * 5 + 3) * 6;
    CHECK(obs.data[east + 0] == doctest::Approx(1.5 / 3.0)); // food / capacity
    CHECK(obs.data[east + 1] == 0.0);
    // Global scalars.
    CHECK(obs.data[150] == doctest::Approx(4.0 / 9.0));
    CHECK(obs.data[151] == doctest::Approx(4.0 / 9.0));
    CHECK(obs.data[152] == doctest::Approx(1.0 / 100.0)); // family weight
    CHECK(obs.data[153] == doctest::Approx(1.0 / 100.0)); // population

    // Every non-center tile carries zero agent features.
    for (int cell = 0; cell < 25; ++cell) {
        if (cell == 12) continue;
        for (int c = 1; c < 6; ++c) CHECK(obs.data[cell * 6 + c] == 0.0);
    }
}

TEST_CASE("kin masking zeroes the kinship channel") {
    auto cfg = micro_config(7, 7);
    cfg.mask_kinship = true;
    auto w = world::World::custom(
        cfg, dirt_grid(7, 7),
        {agent(0, 3, 3, 10.0, 0), agent(1, 3, 4, 10.0, 0)}); // identical kin
    const auto obs = w.observe(0);
    for (int cell = 0; cell < 25; ++cell) CHECK(obs.data[cell * 6 + 4] == 0.0);
}

TEST_CASE("observing a dead or unknown agent is a protocol error") {
    auto cfg = micro_config(4, 4);
    auto w = world::World::custom(cfg, dirt_grid(4, 4), {agent(0, 1, 1, 5.0, 0)});
    CHECK_THROWS_AS(w.observe(42), std::invalid_argument);
}

TEST_CASE("step rejects incomplete or stale action maps") {
    auto cfg = micro_config(4, 4);
    auto w = world::World::custom(cfg, dirt_grid(4, 4),
                                  {agent(0, 1, 1, 5.0, 0), agent(1, 2, 2, 5.0, 1)});
    world::ActionMap missing;
    missing[0] = {};
    CHECK_THROWS_AS(w.step(missing), std::invalid_argument);
    world::ActionMap stale;
    stale[0] = {};
    stale[7] = {}; // unknown id
    CHECK_THROWS_AS(w.step(stale), std::invalid_argument);
}

TEST_CASE("intra-family attack mask voids damage but logs the event") {
    auto cfg = micro_config(5, 5);
    cfg.blocked_family = 0;
    auto w = world::World::custom(
        cfg, dirt_grid(5, 5),
        {agent(0, 2, 2, 10.0, 0), agent(1, 2, 3, 10.0, 0)}); // same family 0
    world::ActionMap actions;
    actions[0] = {world::MoveDir::Stay, true};
    actions[1] = {world::MoveDir::Stay, false};
    const auto ev = w.step(actions);
    REQUIRE(ev.attacks.size() == 1);
    CHECK(ev.attacks[0].blocked);
    CHECK(!ev.attacks[0].lethal);
    CHECK(w.find(1)->health == 2); // untouched
}

TEST_CASE("food growth caps at capacity") {
    world::WorldConfig cfg;
    cfg.width = 3;
    cfg.height = 1;
    cfg.fertility_start = 0;
    cfg.fertility_end = 0;
    cfg.food_growth_rate = 0.15;
    cfg.food_capacity = 3.0;
    auto tiles = dirt_grid(3, 1);
    tiles[0].kind = world::TileKind::FoodSource;
    tiles[0].food = 2.95;
    auto w = world::World::custom(cfg, tiles, {agent(0, 2, 0, 10.0, 0)});
    auto ev = w.step(scenario::stay_all(w));
    CHECK(w.tile_at(0, 0).food == 3.0);
    CHECK(ev.food_grown == doctest::Approx(0.05));
    ev = w.step(scenario::stay_all(w));
    CHECK(w.tile_at(0, 0).food == 3.0);
    CHECK(ev.food_grown == 0.0);
}

TEST_CASE("invariants hold over thousands of random ticks") {
    // Food conservation, occupancy, longevity/food/genome rules, allele-set
    // monotonicity, determinism of event streams.
    for (std::uint64_t seed : {1ULL, 23ULL, 456ULL}) {
        world::WorldConfig cfg;
        cfg.width = 16;
        cfg.height = 16;
        cfg.seed = seed;
        world::World w(cfg);
        world::World w2(cfg);
        Rng rng(seed * 31 + 1);
        Rng rng2(seed * 31 + 1);

        std::set<std::uint32_t> alleles;
        for (const auto& a : w.agents()) alleles.insert(a.genome.alleles[0]);

        for (int t = 0; t < 2000; ++t) {
            if (w.extinct()) break;
            const double before = w.total_tile_food() + w.total_agent_food();
            const auto ev = w.step(world::random_actions(w, rng));
            const auto ev2 = w2.step(world::random_actions(w2, rng2));

            // Determinism: identical event streams.
            std::ostringstream s1, s2;
            io::append_events_jsonl(s1, ev);
            io::append_events_jsonl(s2, ev2);
            REQUIRE(s1.str() == s2.str());

            const double after = w.total_tile_food() + w.total_agent_food();
            REQUIRE(std::abs(after - (before + ev.food_grown - ev.food_eaten -
                                      ev.food_destroyed)) < 1e-9);
            REQUIRE(scenario::occupancy_consistent(w));

            std::set<std::uint32_t> now;
            for (const auto& a : w.agents()) {
                REQUIRE(a.age <= cfg.longevity);
                REQUIRE(a.food_stored > 0.0);
                now.insert(a.genome.alleles[0]);
            }
            // No mutation: the allele set never gains members.
            REQUIRE(std::includes(alleles.begin(), alleles.end(), now.begin(), now.end()));
            alleles = std::move(now);
        }
    }
}

TEST_CASE("world snapshots round-trip through mid-simulation state") {
    world::WorldConfig cfg;
    cfg.width = 12;
    cfg.height = 12;
    cfg.seed = 99;
    world::World w(cfg);
    Rng rng(5);
    for (int t = 0; t < 50 && !w.extinct(); ++t) w.step(world::random_actions(w, rng));

    const auto bytes = io::serialize_world(w);
    auto restored = io::deserialize_world(bytes);
    CHECK(io::serialize_world(restored) == bytes);

    // The restored world continues identically (RNG state included).
    Rng ra(123), rb(123);
    for (int t = 0; t < 20 && !w.extinct(); ++t) {
        const auto e1 = w.step(world::random_actions(w, ra));
        const auto e2 = restored.step(world::random_actions(restored, rb));
        std::ostringstream s1, s2;
        io::append_events_jsonl(s1, e1);
        io::append_events_jsonl(s2, e2);
        REQUIRE(s1.str() == s2.str());
    }
}

TEST_SUITE_END();
