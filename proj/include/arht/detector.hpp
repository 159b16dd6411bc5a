#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arht/bnn.hpp"
#include "arht/hdtest.hpp"
#include "arht/rng.hpp"
#include "arht/types.hpp"

// End-to-end OOD scoring: training-group profile -> per-point posterior
// embedding summary -> pooled covariance (recomputed per point) -> adaptive
// ARHT -> one-sided p-value -> Benjamini-Hochberg thresholding with the
// harmonic correction H_m.
//
// Per-point work is independent given the immutable profile and net, so
// detect() runs it as an OpenMP kernel; detect_reference() is the serial
// implementation kept for testing. Both produce identical reports because
// each point draws from its own stream derived from (seed, point index).

namespace arht::detector {

struct InDistributionProfile {
    hdtest::DistributionSummary summary;  // over all s * N_tr embeddings
    Index embed_dim = 0;
    std::string source_checkpoint;
    int weight_samples_per_point = 0;  // the s used to build the profile
};

struct PointScore {
    std::int64_t point_id = 0;
    bool ok = false;
    std::string error;  // set when ok == false
    hdtest::ArhtResult arht;
    double p_value = 1.0;
    bool rejected = false;
    int label = -1;  // ood flag when known, -1 otherwise
};

struct DetectionReport {
    std::vector<PointScore> points;
    double alpha = 0.0;
    std::int64_t m = 0;  // tests that entered the BH step
    std::int64_t k_hat = 0;
    double threshold_used = 0.0;
};

struct BhResult {
    std::vector<std::size_t> rejected;  // indices into the p-value span
    std::int64_t k_hat = 0;
    double threshold = 0.0;
};

struct DetectConfig {
    int n2 = 300;
    double lambda0 = 0.01;
    double alpha = 0.05;
    std::uint64_t seed = 42;
    int threads = 0;  // 0 = library default; 1 = serial reference
};

// Embeds every training row s times and summarizes. Throws EmptyDataset.
InDistributionProfile build_profile(const bnn::VariationalNet& net,
                                    const Matrix& train_inputs, int s, Rng& rng,
                                    const std::string& source_checkpoint = "");

struct ScoreOutcome {
    hdtest::ArhtResult arht;
    double p_value = 1.0;
};

// Statistic for a test group already summarized: pools with the profile
// summary, picks lambda on the adaptive grid, standardizes, and maps to the
// upper one-sided normal tail.
ScoreOutcome score_summaries(const hdtest::DistributionSummary& profile_summary,
                             const hdtest::DistributionSummary& test_summary,
                             double lambda0);

// Draws n2 posterior embeddings for one point and scores them against the
// profile. Throws InsufficientTestSamples when n2 < 2.
ScoreOutcome score_point(const InDistributionProfile& profile,
                         const bnn::VariationalNet& net, const Vector& point,
                         int n2, double lambda0, Rng& rng);

// Benjamini-Hochberg with harmonic correction:
//   k_hat = max{k : p_(k) <= alpha k / (m H_m)},  H_m = sum_j 1/j,
// rejecting every p_i <= alpha k_hat / (m H_m). Throws InvalidAlpha unless
// 0 < alpha < 1 and InvalidPValue for entries outside [0, 1].
BhResult bh_threshold(std::span<const double> p_values, double alpha);

// Stream id used for test point i inside detect(); score_point with
// Rng::stream(seed, point_stream(i)) reproduces the batch result exactly.
std::uint64_t point_stream(std::int64_t point_index);

// OpenMP-parallel scoring of every test row, then a serial BH reduction.
// Per-point failures are quarantined: recorded on the report and excluded
// from m. `labels` may be empty.
DetectionReport detect(const InDistributionProfile& profile,
                       const bnn::VariationalNet& net, const Matrix& test_inputs,
                       const std::vector<int>& labels,
                       const DetectConfig& config);

// Serial reference implementation; bitwise-identical output to detect().
DetectionReport detect_reference(const InDistributionProfile& profile,
                                 const bnn::VariationalNet& net,
                                 const Matrix& test_inputs,
                                 const std::vector<int>& labels,
                                 const DetectConfig& config);

}  // namespace arht::detector
