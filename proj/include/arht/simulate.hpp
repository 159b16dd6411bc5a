#pragma once

#include <cstdint>
#include <vector>

#include "arht/types.hpp"

// Monte-Carlo null distribution of the adaptive statistic: both groups drawn
// i.i.d. from N(0, I_p), one statistic per replicate. The per-replicate work
// is independent (each replicate derives its own stream from (seed, index)),
// so run() is an OpenMP kernel and run_reference() the serial twin.

namespace arht::simulate {

struct NullSimConfig {
    Index p = 100;
    std::int64_t n1 = 150;
    std::int64_t n2 = 150;
    double lambda0 = 0.01;
    std::int64_t replicates = 2000;
    std::uint64_t seed = 42;
    int threads = 0;  // 0 = library default; 1 = serial reference
};

struct NullSimResult {
    std::vector<double> statistics;  // one per replicate, in replicate order
    std::vector<double> lambdas;
    double mean = 0.0;
    double sd = 0.0;
    double tail_1645 = 0.0;  // fraction of statistics above 1.645
    double tail_196 = 0.0;   // fraction above 1.96
};

NullSimResult run(const NullSimConfig& config);
NullSimResult run_reference(const NullSimConfig& config);

}  // namespace arht::simulate
