#pragma once

#include <vector>

#include "arht/errors.hpp"
#include "arht/types.hpp"

namespace arht::eval {

// Scores with binary ground truth; label 1 marks the positive (OOD) class.
struct ScoredLabels {
    std::vector<double> scores;
    std::vector<int> labels;
};

// P(random positive outranks random negative); ties count 1/2 (Mann-Whitney).
// Throws DegenerateLabels unless both classes are present.
double auroc(const ScoredLabels& data);

// Average precision (step-wise interpolation). Throws NoPositives when no
// positive labels exist. Tied scores rank by ascending original index.
double aupr(const ScoredLabels& data);

struct ClassPredictions {
    Matrix probabilities;          // m x K, rows sum to 1
    std::vector<int> true_classes;
};

struct AccuracyF1 {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

// Argmax decision (ties toward the lowest class index); macro F1 is the
// unweighted mean of per-class F1, with absent classes contributing 0.
AccuracyF1 accuracy_f1(const ClassPredictions& preds);

// Per-point Shannon entropy in nats; 0 ln 0 = 0.
std::vector<double> entropy_score(const ClassPredictions& preds);

// Per-point maximum class probability (confidence). Negate to rank OOD-first.
std::vector<double> max_prob_score(const ClassPredictions& preds);

}  // namespace arht::eval
