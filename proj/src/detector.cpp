#include "arht/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "arht/stats.hpp"

namespace arht::detector {

namespace {

constexpr std::uint64_t kPointStreamBase = 0x80000000ULL;

void score_one(const InDistributionProfile& profile,
               const bnn::VariationalNet& net, const Matrix& test_inputs,
               const std::vector<int>& labels, const DetectConfig& config,
               std::int64_t i, PointScore& slot) {
    slot.point_id = i;
    slot.label = labels.empty() ? -1 : labels[static_cast<std::size_t>(i)];
    try {
        Rng rng = Rng::stream(config.seed, point_stream(i));
        ScoreOutcome outcome = score_point(profile, net, test_inputs.row(i),
                                           config.n2, config.lambda0, rng);
        slot.arht = outcome.arht;
        slot.p_value = outcome.p_value;
        slot.ok = true;
    } catch (const Error& e) {
        slot.ok = false;
        slot.error = e.what();
    }
}

DetectionReport finalize(std::vector<PointScore> points, double alpha) {
    DetectionReport report;
    report.alpha = alpha;

    std::vector<double> p_values;
    std::vector<std::size_t> origin;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].ok) {
            p_values.push_back(points[i].p_value);
            origin.push_back(i);
        }
    }
    report.m = static_cast<std::int64_t>(p_values.size());

    BhResult bh = bh_threshold(p_values, alpha);
    report.k_hat = bh.k_hat;
    report.threshold_used = bh.threshold;
    for (std::size_t idx : bh.rejected) {
        points[origin[idx]].rejected = true;
    }
    report.points = std::move(points);
    return report;
}

}  // namespace

std::uint64_t point_stream(std::int64_t point_index) {
    return kPointStreamBase + static_cast<std::uint64_t>(point_index);
}

InDistributionProfile build_profile(const bnn::VariationalNet& net,
                                    const Matrix& train_inputs, int s, Rng& rng,
                                    const std::string& source_checkpoint) {
    if (train_inputs.rows() == 0) {
        throw EmptyDataset("cannot build a profile from an empty dataset");
    }
    bnn::EmbeddingSet embeddings = bnn::embed_training_set(net, train_inputs, s, rng);
    InDistributionProfile profile;
    profile.summary = hdtest::DistributionSummary::from_rows(embeddings.vectors);
    profile.embed_dim = net.embed_dim();
    profile.source_checkpoint = source_checkpoint;
    profile.weight_samples_per_point = s;
    return profile;
}

ScoreOutcome score_summaries(const hdtest::DistributionSummary& profile_summary,
                             const hdtest::DistributionSummary& test_summary,
                             double lambda0) {
    hdtest::PooledCovariance pooled =
        hdtest::pooled_covariance(profile_summary, test_summary);
    hdtest::SpectralCache cache(pooled);
    hdtest::LambdaChoice choice =
        hdtest::select_lambda(profile_summary, test_summary, lambda0, cache);
    ScoreOutcome out;
    out.arht = hdtest::arht(profile_summary, test_summary, choice.lambda, cache);
    out.p_value = stats::normal_upper_tail(out.arht.statistic);
    return out;
}

ScoreOutcome score_point(const InDistributionProfile& profile,
                         const bnn::VariationalNet& net, const Vector& point,
                         int n2, double lambda0, Rng& rng) {
    if (n2 < 2) {
        throw InsufficientTestSamples(
            "test-group scatter needs n2 >= 2, got " + std::to_string(n2));
    }
    bnn::EmbeddingSet embeddings = bnn::embed(net, point, n2, rng);
    hdtest::DistributionSummary test_summary =
        hdtest::DistributionSummary::from_rows(embeddings.vectors);
    return score_summaries(profile.summary, test_summary, lambda0);
}

BhResult bh_threshold(std::span<const double> p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidAlpha("alpha must lie in (0, 1), got " +
                           std::to_string(alpha));
    }
    const auto m = static_cast<std::int64_t>(p_values.size());
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw InvalidPValue("p-value outside [0, 1]: " + std::to_string(p));
        }
    }

    BhResult out;
    if (m == 0) {
        return out;
    }

    std::vector<double> sorted(p_values.begin(), p_values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h_m = stats::harmonic(m);
    const double mh = static_cast<double>(m) * h_m;

    for (std::int64_t k = m; k >= 1; --k) {
        if (sorted[static_cast<std::size_t>(k - 1)] <=
            alpha * static_cast<double>(k) / mh) {
            out.k_hat = k;
            break;
        }
    }
    out.threshold = alpha * static_cast<double>(out.k_hat) / mh;
    if (out.k_hat > 0) {
        for (std::size_t i = 0; i < p_values.size(); ++i) {
            if (p_values[i] <= out.threshold) {
                out.rejected.push_back(i);
            }
        }
    }
    return out;
}

DetectionReport detect(const InDistributionProfile& profile,
                       const bnn::VariationalNet& net, const Matrix& test_inputs,
                       const std::vector<int>& labels,
                       const DetectConfig& config) {
    if (config.threads == 1) {
        return detect_reference(profile, net, test_inputs, labels, config);
    }
    const auto n = static_cast<std::int64_t>(test_inputs.rows());
    std::vector<PointScore> points(static_cast<std::size_t>(n));
#ifdef _OPENMP
    const int nt = config.threads > 1 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        score_one(profile, net, test_inputs, labels, config, i,
                  points[static_cast<std::size_t>(i)]);
    }
    return finalize(std::move(points), config.alpha);
}

DetectionReport detect_reference(const InDistributionProfile& profile,
                                 const bnn::VariationalNet& net,
                                 const Matrix& test_inputs,
                                 const std::vector<int>& labels,
                                 const DetectConfig& config) {
    const auto n = static_cast<std::int64_t>(test_inputs.rows());
    std::vector<PointScore> points(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        score_one(profile, net, test_inputs, labels, config, i,
                  points[static_cast<std::size_t>(i)]);
    }
    return finalize(std::move(points), config.alpha);
}

}  // namespace arht::detector
