#include "arht/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arht::eval {

double auroc(const ScoredLabels& data) {
    const std::size_t m = data.scores.size();
    std::int64_t n_pos = 0;
    for (int label : data.labels) {
        n_pos += label == 1;
    }
    const std::int64_t n_neg = static_cast<std::int64_t>(m) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DegenerateLabels("AUROC needs both classes present");
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.scores[a] < data.scores[b];
    });

    // Midranks handle ties, which realizes the 1/2 convention.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < m) {
        std::size_t j = i;
        while (j < m && data.scores[order[j]] == data.scores[order[i]]) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (data.labels[order[k]] == 1) {
                pos_rank_sum += midrank;
            }
        }
        i = j;
    }
    const auto np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double aupr(const ScoredLabels& data) {
    const std::size_t m = data.scores.size();
    std::int64_t n_pos = 0;
    for (int label : data.labels) {
        n_pos += label == 1;
    }
    if (n_pos == 0) {
        throw NoPositives("average precision needs at least one positive");
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return data.scores[a] > data.scores[b];
                     });

    double ap = 0.0;
    std::int64_t tp = 0;
    for (std::size_t k = 0; k < m; ++k) {
        if (data.labels[order[k]] == 1) {
            ++tp;
            ap += static_cast<double>(tp) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

AccuracyF1 accuracy_f1(const ClassPredictions& preds) {
    const Index m = preds.probabilities.rows();
    const Index k = preds.probabilities.cols();

    std::vector<std::int64_t> tp(k, 0), fp(k, 0), fn(k, 0);
    std::int64_t correct = 0;
    for (Index i = 0; i < m; ++i) {
        Index arg = 0;
        for (Index c = 1; c < k; ++c) {
            if (preds.probabilities(i, c) > preds.probabilities(i, arg)) {
                arg = c;  // strict > ties toward the lowest index
            }
        }
        const Index truth = preds.true_classes[i];
        if (arg == truth) {
            ++correct;
            ++tp[arg];
        } else {
            ++fp[arg];
            ++fn[truth];
        }
    }

    double f1_sum = 0.0;
    for (Index c = 0; c < k; ++c) {
        const double denom_p = static_cast<double>(tp[c] + fp[c]);
        const double denom_r = static_cast<double>(tp[c] + fn[c]);
        const double precision = denom_p > 0 ? tp[c] / denom_p : 0.0;
        const double recall = denom_r > 0 ? tp[c] / denom_r : 0.0;
        f1_sum += (precision + recall) > 0.0
                      ? 2.0 * precision * recall / (precision + recall)
                      : 0.0;
    }

    AccuracyF1 out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(m);
    out.macro_f1 = f1_sum / static_cast<double>(k);
    return out;
}

std::vector<double> entropy_score(const ClassPredictions& preds) {
    std::vector<double> out(preds.probabilities.rows());
    for (Index i = 0; i < preds.probabilities.rows(); ++i) {
        double h = 0.0;
        for (Index c = 0; c < preds.probabilities.cols(); ++c) {
            const double p = preds.probabilities(i, c);
            if (p > 0.0) {
                h -= p * std::log(p);
            }
        }
        out[static_cast<std::size_t>(i)] = h;
    }
    return out;
}

std::vector<double> max_prob_score(const ClassPredictions& preds) {
    std::vector<double> out(preds.probabilities.rows());
    for (Index i = 0; i < preds.probabilities.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = preds.probabilities.row(i).maxCoeff();
    }
    return out;
}

}  // namespace arht::eval
