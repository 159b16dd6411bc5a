#include "arht/simulate.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "arht/data.hpp"
#include "arht/detector.hpp"
#include "arht/hdtest.hpp"
#include "arht/rng.hpp"

namespace arht::simulate {

namespace {

void one_replicate(const NullSimConfig& config, std::int64_t r,
                   double& stat_slot, double& lambda_slot) {
    // Sub-seed per replicate keeps streams independent of thread layout.
    Rng seeder = Rng::stream(config.seed, static_cast<std::uint64_t>(r));
    auto [x1, x2] =
        data::gen_null_pair(config.p, config.n1, config.n2, seeder.next_u64());
    auto g1 = hdtest::DistributionSummary::from_rows(x1);
    auto g2 = hdtest::DistributionSummary::from_rows(x2);
    detector::ScoreOutcome outcome =
        detector::score_summaries(g1, g2, config.lambda0);
    stat_slot = outcome.arht.statistic;
    lambda_slot = outcome.arht.lambda;
}

NullSimResult summarize(NullSimResult result) {
    const auto n = static_cast<double>(result.statistics.size());
    double sum = 0.0;
    std::int64_t above_1645 = 0, above_196 = 0;
    for (double s : result.statistics) {
        sum += s;
        above_1645 += s > 1.645;
        above_196 += s > 1.96;
    }
    result.mean = sum / n;
    double ss = 0.0;
    for (double s : result.statistics) {
        ss += (s - result.mean) * (s - result.mean);
    }
    result.sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    result.tail_1645 = above_1645 / n;
    result.tail_196 = above_196 / n;
    return result;
}

}  // namespace

NullSimResult run(const NullSimConfig& config) {
    if (config.threads == 1) {
        return run_reference(config);
    }
    NullSimResult result;
    result.statistics.resize(config.replicates);
    result.lambdas.resize(config.replicates);
#ifdef _OPENMP
    const int nt = config.threads > 1 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
    for (std::int64_t r = 0; r < config.replicates; ++r) {
        one_replicate(config, r, result.statistics[r], result.lambdas[r]);
    }
    return summarize(std::move(result));
}

NullSimResult run_reference(const NullSimConfig& config) {
    NullSimResult result;
    result.statistics.resize(config.replicates);
    result.lambdas.resize(config.replicates);
    for (std::int64_t r = 0; r < config.replicates; ++r) {
        one_replicate(config, r, result.statistics[r], result.lambdas[r]);
    }
    return summarize(std::move(result));
}

}  // namespace arht::simulate
