// Throughput comparison between the serial reference lane (threads = 1) and
// the OpenMP lane for the three batch kernels: training ticks, evaluation
// episodes, and raw world stepping under random actions.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evogrid/analytics.hpp"
#include "evogrid/evdn.hpp"
#include "evogrid/world.hpp"

using namespace evogrid;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

world::WorldConfig desk_world() {
    world::WorldConfig w;
    w.width = 20;
    w.height = 20;
    w.founder_count = 5;
    return w;
}

double bench_train(int threads, int ticks) {
    evdn::TrainerConfig t;
    t.env_count = 16;
    t.threads = threads;
    t.eps_decay_ticks = 1000;
    kinrew::RewardConfig r;
    r.kind = kinrew::RewardKind::Sugary;
    evdn::Trainer trainer(desk_world(), r, t, 99);
    const auto start = std::chrono::steady_clock::now();
    std::int64_t experiences = 0;
    for (int i = 0; i < ticks; ++i) experiences += trainer.step().experiences;
    const double dt = seconds_since(start);
    std::printf("  train   threads=%d  %6.1f ticks/s  (%lld experiences)\n", threads,
                ticks / dt, static_cast<long long>(experiences));
    return dt;
}

double bench_eval(int threads, int episodes) {
    neural::ArchSpec arch; // SmallConv default
    std::vector<neural::QNetwork> nets;
    std::vector<const neural::QNetwork*> ptrs;
    for (int i = 0; i < 5; ++i) nets.emplace_back(arch, 1000 + i);
    for (const auto& n : nets) ptrs.push_back(&n);
    analytics::EvalConfig cfg;
    cfg.episodes = episodes;
    cfg.length = 200;
    cfg.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    analytics::evaluate(desk_world(), ptrs, cfg, 5);
    const double dt = seconds_since(start);
    std::printf("  eval    threads=%d  %6.2f episodes/s\n", threads, episodes / dt);
    return dt;
}

double bench_world(int ticks) {
    world::WorldConfig cfg = desk_world();
    cfg.seed = 3;
    world::World w(cfg);
    Rng rng(4);
    const auto start = std::chrono::steady_clock::now();
    int done = 0;
    for (int i = 0; i < ticks; ++i) {
        if (w.extinct()) w = world::World(cfg);
        w.step(world::random_actions(w, rng));
        ++done;
    }
    const double dt = seconds_since(start);
    std::printf("  world   serial     %6.0f ticks/s\n", done / dt);
    return dt;
}

} // namespace

int main(int argc, char** argv) {
    int train_ticks = 300;
    int episodes = 16;
    if (argc > 1) train_ticks = std::atoi(argv[1]);
    if (argc > 2) episodes = std::atoi(argv[2]);

#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
#endif
    std::printf("benchmark: serial reference vs OpenMP (%d hardware threads)\n", max_threads);

    std::printf("world stepping:\n");
    bench_world(20000);

    std::printf("training ticks (%d):\n", train_ticks);
    const double t1 = bench_train(1, train_ticks);
    const double tn = bench_train(0, train_ticks);
    std::printf("  speedup %.2fx\n", t1 / tn);

    std::printf("evaluation episodes (%d):\n", episodes);
    const double e1 = bench_eval(1, episodes);
    const double en = bench_eval(0, episodes);
    std::printf("  speedup %.2fx\n", e1 / en);
    return 0;
}
