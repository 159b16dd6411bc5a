#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arht/errors.hpp"
#include "arht/types.hpp"

namespace arht::data {

// Two-Gaussian regression benchmark: in-distribution N(mu, variance * I),
// out-of-distribution N(-mu, variance * I), regression target = Euclidean
// norm of the input.
struct SyntheticSpec {
    Index dim = 128;
    double mu_value = 0.5;       // every coordinate of the mean vector
    double variance = 9.0;       // Sigma = variance * I
    std::int64_t n_train = 500;
    std::int64_t n_test_in = 500;
    std::int64_t n_test_ood = 500;
    std::uint64_t seed = 42;
};

struct LabeledVectors {
    Matrix inputs;                // m x d
    Vector targets;               // regression values or class indices
    std::vector<int> ood_flags;   // 1 = OOD; empty when unknown

    Index size() const { return inputs.rows(); }
};

// Deterministic in spec.seed. Train targets and test targets are the input
// norms; test rows are n_test_in in-distribution points followed by
// n_test_ood OOD points.
std::pair<LabeledVectors, LabeledVectors> gen_table8(const SyntheticSpec& spec);

// Two sets drawn i.i.d. from the same N(0, I_p); drives null calibration.
std::pair<Matrix, Matrix> gen_null_pair(Index p, std::int64_t n1,
                                        std::int64_t n2, std::uint64_t seed);

// Minimal IDX reader (big-endian, MNIST conventions). Magic 0x00000803 yields
// image rows flattened and scaled to [0, 1] in `inputs`; 0x00000801 yields
// label bytes in `targets`. Throws BadMagic / TruncatedFile /
// DimensionOverflow.
LabeledVectors read_idx(const std::string& path);

// Convenience: images plus optional labels from separate IDX files.
LabeledVectors load_idx_pair(const std::string& images_path,
                             const std::string& labels_path);

// One row per point: x_0,...,x_{d-1},target,ood_flag (flag last).
void write_csv(const LabeledVectors& data, const std::string& path);

}  // namespace arht::data
