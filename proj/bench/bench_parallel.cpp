// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce identical output.
//
//   bench_parallel [replicates] [test_points]

#include <chrono>
#include <cstdlib>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "arht/bnn.hpp"
#include "arht/data.hpp"
#include "arht/detector.hpp"
#include "arht/simulate.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    const std::int64_t replicates = argc > 1 ? std::atoll(argv[1]) : 400;
    const std::int64_t test_points = argc > 2 ? std::atoll(argv[2]) : 100;

#ifdef _OPENMP
    std::cout << "max threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "built without OpenMP\n";
#endif

    // Null-simulation kernel.
    arht::simulate::NullSimConfig sim;
    sim.p = 64;
    sim.n1 = 120;
    sim.n2 = 120;
    sim.replicates = replicates;
    sim.seed = 7;

    auto t0 = Clock::now();
    sim.threads = 1;
    auto serial = arht::simulate::run_reference(sim);
    const double t_serial_sim = seconds_since(t0);

    t0 = Clock::now();
    sim.threads = 0;
    auto parallel = arht::simulate::run(sim);
    const double t_parallel_sim = seconds_since(t0);

    bool sim_match = serial.statistics == parallel.statistics;
    std::cout << "simulate-null (" << replicates << " reps): serial "
              << t_serial_sim << " s, parallel " << t_parallel_sim
              << " s, speedup " << t_serial_sim / t_parallel_sim
              << ", outputs " << (sim_match ? "identical" : "DIFFER") << "\n";

    // Detection kernel.
    arht::data::SyntheticSpec spec;
    spec.dim = 32;
    spec.n_train = 100;
    spec.n_test_in = test_points / 2;
    spec.n_test_ood = test_points - test_points / 2;
    spec.seed = 7;
    auto [train, test] = arht::data::gen_table8(spec);

    arht::Rng init = arht::Rng::stream(7, 1);
    auto net = arht::bnn::make_net({spec.dim, 24, 1},
                                   arht::bnn::Activation::Relu, 1.0, init);
    arht::Rng prof_rng = arht::Rng::stream(7, 2);
    auto profile = arht::detector::build_profile(net, train.inputs, 3, prof_rng);

    arht::detector::DetectConfig config;
    config.n2 = 60;
    config.seed = 7;

    t0 = Clock::now();
    auto ref = arht::detector::detect_reference(profile, net, test.inputs,
                                                test.ood_flags, config);
    const double t_serial_det = seconds_since(t0);

    t0 = Clock::now();
    auto par =
        arht::detector::detect(profile, net, test.inputs, test.ood_flags, config);
    const double t_parallel_det = seconds_since(t0);

    bool det_match = ref.points.size() == par.points.size();
    if (det_match) {
        for (std::size_t i = 0; i < ref.points.size(); ++i) {
            det_match = det_match &&
                        ref.points[i].p_value == par.points[i].p_value &&
                        ref.points[i].arht.statistic ==
                            par.points[i].arht.statistic &&
                        ref.points[i].rejected == par.points[i].rejected;
        }
    }
    std::cout << "detect (" << test_points << " points): serial "
              << t_serial_det << " s, parallel " << t_parallel_det
              << " s, speedup " << t_serial_det / t_parallel_det
              << ", outputs " << (det_match ? "identical" : "DIFFER") << "\n";

    return (sim_match && det_match) ? 0 : 1;
}
