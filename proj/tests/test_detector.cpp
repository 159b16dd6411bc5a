#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "arht/data.hpp"
#include "arht/detector.hpp"
#include "arht/eval.hpp"
#include "arht/report_io.hpp"

using namespace arht;
using namespace arht::detector;

namespace {

// Exhaustive scan over every k; independent of the production bh_threshold.
struct BhOracle {
    std::vector<std::size_t> rejected;
    std::int64_t k_hat = 0;
    double threshold = 0.0;
};

BhOracle bh_brute_force(const std::vector<double>& p_values, double alpha) {
    const auto m = static_cast<std::int64_t>(p_values.size());
    double h = 0.0;
    for (std::int64_t j = 1; j <= m; ++j) {
        h += 1.0 / static_cast<double>(j);
    }
    std::vector<double> sorted = p_values;
    std::sort(sorted.begin(), sorted.end());
    BhOracle out;
    for (std::int64_t k = 1; k <= m; ++k) {
        const double bound = alpha * static_cast<double>(k) /
                             (static_cast<double>(m) * h);
        if (sorted[static_cast<std::size_t>(k - 1)] <= bound) {
            out.k_hat = k;  // keep scanning: max over k
        }
    }
    out.threshold = m > 0 ? alpha * static_cast<double>(out.k_hat) /
                                (static_cast<double>(m) * h)
                          : 0.0;
    if (out.k_hat > 0) {
        for (std::size_t i = 0; i < p_values.size(); ++i) {
            if (p_values[i] <= out.threshold) {
                out.rejected.push_back(i);
            }
        }
    }
    return out;
}

bnn::VariationalNet small_net(Index in, Index hidden, std::uint64_t seed) {
    Rng rng(seed);
    return bnn::make_net({in, hidden, 1}, bnn::Activation::Relu, 1.0, rng);
}

hdtest::DistributionSummary gaussian_summary(Index n, Index p, double shift,
                                             Rng& rng) {
    Matrix rows = Matrix::NullaryExpr(
        n, p, [&]() { return shift + rng.next_gaussian(); });
    return hdtest::DistributionSummary::from_rows(rows);
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("profile of a collapsed net over identical inputs has zero scatter") {
    bnn::VariationalNet net = small_net(3, 4, 1);
    for (auto& layer : net.layers) {
        layer.rho_w.setConstant(-1000.0);
        layer.rho_b.setConstant(-1000.0);
    }
    Matrix inputs(3, 3);
    inputs << 1, 2, 3, 1, 2, 3, 1, 2, 3;
    Rng rng(5);
    InDistributionProfile profile = build_profile(net, inputs, 2, rng);
    CHECK(profile.summary.count == 6);
    CHECK(profile.summary.scatter.isZero(1e-30));
}

TEST_CASE("profile counts and mean match a direct average") {
    bnn::VariationalNet net = small_net(4, 5, 2);
    Rng data_rng(7);
    Matrix inputs = Matrix::NullaryExpr(
        100, 4, [&]() { return data_rng.next_gaussian(); });
    Rng rng(9);
    InDistributionProfile profile = build_profile(net, inputs, 5, rng);
    CHECK(profile.summary.count == 500);
    CHECK(profile.embed_dim == 5);

    // Brute-force oracle: rerun the identical embedding stream and average.
    Rng rng2(9);
    bnn::EmbeddingSet set = bnn::embed_training_set(net, inputs, 5, rng2);
    Vector avg = Vector::Zero(5);
    for (Index r = 0; r < set.size(); ++r) {
        avg += set.vectors.row(r).transpose();
    }
    avg /= static_cast<double>(set.size());
    CHECK((profile.summary.mean - avg).norm() <=
          1e-12 * std::max(1.0, avg.norm()));

    Matrix empty(0, 4);
    Rng rng3(1);
    CHECK_THROWS_AS((void)build_profile(net, empty, 2, rng3), EmptyDataset);
}

TEST_CASE("null score gives approximately uniform p-values") {
    Rng rng(42);
    const Index p = 20;
    auto profile_summary = gaussian_summary(200, p, 0.0, rng);
    int below_half = 0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        auto test_summary = gaussian_summary(60, p, 0.0, rng);
        ScoreOutcome outcome =
            score_summaries(profile_summary, test_summary, 0.01);
        CHECK(outcome.p_value >= 0.0);
        CHECK(outcome.p_value <= 1.0);
        below_half += outcome.p_value <= 0.5;
    }
    const double ecdf = static_cast<double>(below_half) / reps;
    CHECK(ecdf >= 0.42);
    CHECK(ecdf <= 0.58);
}

TEST_CASE("strongly shifted groups are detected with tiny p-values") {
    Rng rng(43);
    const Index p = 20;
    auto profile_summary = gaussian_summary(200, p, 0.0, rng);
    auto shifted = gaussian_summary(60, p, 10.0, rng);  // shift = 10 sigma
    ScoreOutcome outcome = score_summaries(profile_summary, shifted, 0.01);
    CHECK(outcome.p_value < 0.001);
    CHECK(outcome.arht.statistic > 3.0);
}

TEST_CASE("score_point needs at least two draws and default config is 300") {
    bnn::VariationalNet net = small_net(3, 4, 3);
    Rng data_rng(1);
    Matrix inputs = Matrix::NullaryExpr(
        20, 3, [&]() { return data_rng.next_gaussian(); });
    Rng rng(2);
    InDistributionProfile profile = build_profile(net, inputs, 2, rng);
    Vector x = Vector::Zero(3);
    Rng score_rng(3);
    CHECK_THROWS_AS((void)score_point(profile, net, x, 1, 0.01, score_rng),
                    InsufficientTestSamples);
    CHECK(DetectConfig{}.n2 == 300);
    CHECK(DetectConfig{}.lambda0 == 0.01);
}

TEST_CASE("bh threshold on the worked example") {
    std::vector<double> p{0.001, 0.02, 0.03, 0.9};
    BhResult res = bh_threshold(p, 0.05);
    // H_4 = 25/12; bound(k) = 0.05 k / (4 * 25/12) = 0.006 k.
    CHECK(res.k_hat == 1);
    CHECK(res.threshold == doctest::Approx(0.006).epsilon(1e-12));
    REQUIRE(res.rejected.size() == 1);
    CHECK(res.rejected[0] == 0);
}

TEST_CASE("bh threshold edge cases") {
    std::vector<double> all_ones{1.0, 1.0, 1.0};
    BhResult res = bh_threshold(all_ones, 0.05);
    CHECK(res.k_hat == 0);
    CHECK(res.rejected.empty());

    std::vector<double> empty;
    res = bh_threshold(empty, 0.1);
    CHECK(res.k_hat == 0);

    std::vector<double> ok{0.5};
    CHECK_THROWS_AS((void)bh_threshold(ok, 0.0), InvalidAlpha);
    CHECK_THROWS_AS((void)bh_threshold(ok, 1.0), InvalidAlpha);
    std::vector<double> bad{0.5, 1.5};
    CHECK_THROWS_AS((void)bh_threshold(bad, 0.05), InvalidPValue);
    std::vector<double> nan_p{0.5, std::nan("")};
    CHECK_THROWS_AS((void)bh_threshold(nan_p, 0.05), InvalidPValue);
}

TEST_CASE("bh threshold matches the brute-force scan on random sets") {
    Rng rng(44);
    for (int it = 0; it < 500; ++it) {
        const int m = 1 + static_cast<int>(rng.next_u64() % 20);
        std::vector<double> p(m);
        for (double& v : p) {
            const double u = rng.next_double();
            v = u < 0.2 ? u * 0.01 : u;  // mix of small and large p-values
        }
        const double alpha = 0.01 + 0.5 * rng.next_double();
        BhResult mine = bh_threshold(p, alpha);
        BhOracle oracle = bh_brute_force(p, alpha);
        CHECK(mine.k_hat == oracle.k_hat);
        CHECK(mine.threshold == oracle.threshold);
        CHECK(mine.rejected == oracle.rejected);
    }
}

TEST_CASE("bh rejections shrink with alpha and contain the smallest p") {
    Rng rng(45);
    std::vector<double> p(40);
    for (double& v : p) {
        v = std::pow(rng.next_double(), 3.0);
    }
    std::size_t prev = p.size() + 1;
    for (double alpha : {0.2, 0.1, 0.05, 0.01}) {
        BhResult res = bh_threshold(p, alpha);
        CHECK(res.rejected.size() <= prev);
        prev = res.rejected.size();
        if (!res.rejected.empty()) {
            const auto min_idx = static_cast<std::size_t>(
                std::min_element(p.begin(), p.end()) - p.begin());
            CHECK(std::find(res.rejected.begin(), res.rejected.end(), min_idx) !=
                  res.rejected.end());
        }
    }
}

TEST_CASE("false rejections stay near the nominal level under mixed truth") {
    Rng rng(46);
    const Index p = 15;
    auto profile_summary = gaussian_summary(300, p, 0.0, rng);
    std::vector<double> p_values;
    std::vector<int> is_null;
    for (int i = 0; i < 120; ++i) {
        const bool null_point = i % 2 == 0;
        auto test_summary =
            gaussian_summary(40, p, null_point ? 0.0 : 10.0, rng);
        p_values.push_back(
            score_summaries(profile_summary, test_summary, 0.01).p_value);
        is_null.push_back(null_point);
    }
    BhResult res = bh_threshold(p_values, 0.05);
    std::int64_t null_rejected = 0, alt_rejected = 0;
    for (std::size_t idx : res.rejected) {
        (is_null[idx] ? null_rejected : alt_rejected)++;
    }
    CHECK(alt_rejected == 60);  // every shifted point fires
    CHECK(null_rejected <= static_cast<std::int64_t>(0.05 * p_values.size()));
}

TEST_CASE("detect on an empty test set yields an empty report") {
    bnn::VariationalNet net = small_net(3, 4, 4);
    Rng data_rng(2);
    Matrix inputs = Matrix::NullaryExpr(
        15, 3, [&]() { return data_rng.next_gaussian(); });
    Rng rng(3);
    InDistributionProfile profile = build_profile(net, inputs, 2, rng);
    Matrix empty(0, 3);
    DetectConfig config;
    config.n2 = 10;
    DetectionReport report = detect(profile, net, empty, {}, config);
    CHECK(report.m == 0);
    CHECK(report.k_hat == 0);
    CHECK(report.points.empty());
}

TEST_CASE("degenerate points are quarantined, not fatal") {
    // A fully collapsed net on identical inputs gives zero scatter on both
    // sides, so every regularizer candidate degenerates for every point.
    bnn::VariationalNet net = small_net(3, 4, 8);
    for (auto& layer : net.layers) {
        layer.rho_w.setConstant(-1000.0);
        layer.rho_b.setConstant(-1000.0);
    }
    Matrix inputs(3, 3);
    inputs << 1, 2, 3, 1, 2, 3, 1, 2, 3;
    Rng rng(4);
    InDistributionProfile profile = build_profile(net, inputs, 2, rng);
    Matrix test = inputs.topRows(2);
    DetectConfig config;
    config.n2 = 5;
    DetectionReport report = detect(profile, net, test, {}, config);
    REQUIRE(report.points.size() == 2);
    CHECK(report.m == 0);
    CHECK(report.k_hat == 0);
    for (const auto& point : report.points) {
        CHECK_FALSE(point.ok);
        CHECK_FALSE(point.error.empty());
        CHECK_FALSE(point.rejected);
    }

    // The CSV writer emits empty numeric cells for quarantined rows.
    const std::string dir_path = []() {
        char buf[] = "/tmp/arht_quarantine_XXXXXX";
        return std::string(mkdtemp(buf));
    }();
    const std::string csv = dir_path + "/report.csv";
    report::write_report_csv(report, csv);
    std::ifstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "point_id,label,lambda,rht,arht,p_value,rejected");
    CHECK(row == "0,,,,,,0");
}

TEST_CASE("detect is per-point reproducible and internally consistent") {
    data::SyntheticSpec spec;
    spec.dim = 8;
    spec.n_train = 40;
    spec.n_test_in = 12;
    spec.n_test_ood = 12;
    spec.seed = 77;
    auto [train, test] = data::gen_table8(spec);

    bnn::VariationalNet net = small_net(8, 6, 5);
    Rng rng(6);
    InDistributionProfile profile = build_profile(net, train.inputs, 2, rng);

    DetectConfig config;
    config.n2 = 20;
    config.seed = 99;
    config.alpha = 0.05;
    DetectionReport report =
        detect(profile, net, test.inputs, test.ood_flags, config);

    REQUIRE(report.points.size() == 24);
    CHECK(report.m == 24);
    for (const auto& point : report.points) {
        REQUIRE(point.ok);
        CHECK(std::isfinite(point.p_value));
        CHECK(point.p_value >= 0.0);
        CHECK(point.p_value <= 1.0);
        CHECK(point.rejected == (point.p_value <= report.threshold_used));
    }

    // Scoring a point alone with its batch stream reproduces the batch row.
    for (std::int64_t i : {0L, 7L, 23L}) {
        Rng point_rng = Rng::stream(config.seed, point_stream(i));
        ScoreOutcome solo = score_point(profile, net, test.inputs.row(i),
                                        config.n2, config.lambda0, point_rng);
        CHECK(solo.p_value == report.points[i].p_value);
        CHECK(solo.arht.statistic == report.points[i].arht.statistic);
        CHECK(solo.arht.lambda == report.points[i].arht.lambda);
    }

    // Lowering alpha never enlarges the rejection set.
    DetectConfig strict = config;
    strict.alpha = 0.01;
    DetectionReport tighter =
        detect(profile, net, test.inputs, test.ood_flags, strict);
    std::int64_t loose_count = 0, tight_count = 0;
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        loose_count += report.points[i].rejected;
        tight_count += tighter.points[i].rejected;
        if (tighter.points[i].rejected) {
            CHECK(report.points[i].rejected);
        }
    }
    CHECK(tight_count <= loose_count);
}

TEST_CASE("ood points sit above in-distribution points on the trained pipeline") {
    data::SyntheticSpec spec;
    spec.dim = 32;
    spec.n_train = 60;
    spec.n_test_in = 25;
    spec.n_test_ood = 25;
    spec.seed = 123;
    auto [train, test] = data::gen_table8(spec);

    Rng init(9);
    auto net = bnn::make_net({32, 16, 1}, bnn::Activation::Relu, 1.0, init);
    bnn::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 20;
    tc.seed = 10;
    bnn::train(net, train.inputs, train.targets, tc);

    Rng rng(11);
    InDistributionProfile profile = build_profile(net, train.inputs, 3, rng);
    DetectConfig config;
    config.n2 = 40;
    config.seed = 12;
    DetectionReport report =
        detect(profile, net, test.inputs, test.ood_flags, config);

    std::vector<double> in_stats, ood_stats;
    for (const auto& point : report.points) {
        REQUIRE(point.ok);
        (point.label == 1 ? ood_stats : in_stats).push_back(point.arht.statistic);
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(median(ood_stats) > median(in_stats));

    // Ranking quality should be far better than chance at this separation.
    eval::ScoredLabels scored;
    for (const auto& point : report.points) {
        scored.scores.push_back(point.arht.statistic);
        scored.labels.push_back(point.label);
    }
    CHECK(eval::auroc(scored) > 0.65);
}

}  // TEST_SUITE
