#include "arht/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "arht/rng.hpp"

namespace arht::data {

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestInStream = 2;
constexpr std::uint64_t kTestOodStream = 3;

Matrix gaussian_rows(Index n, Index d, double mean, double stddev, Rng& rng) {
    Matrix out(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            out(i, j) = mean + stddev * rng.next_gaussian();
        }
    }
    return out;
}

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw TruncatedFile("unexpected end of IDX header");
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

std::pair<LabeledVectors, LabeledVectors> gen_table8(const SyntheticSpec& spec) {
    if (spec.dim < 1 || spec.n_train < 1 || spec.n_test_in < 1 ||
        spec.n_test_ood < 1 || !(spec.variance > 0.0)) {
        throw Error("synthetic spec needs positive dim, counts, and variance");
    }
    const double sd = std::sqrt(spec.variance);

    LabeledVectors train;
    {
        Rng rng = Rng::stream(spec.seed, kTrainStream);
        train.inputs = gaussian_rows(spec.n_train, spec.dim, spec.mu_value, sd, rng);
        train.targets = train.inputs.rowwise().norm();
        train.ood_flags.assign(spec.n_train, 0);
    }

    LabeledVectors test;
    {
        Rng rng_in = Rng::stream(spec.seed, kTestInStream);
        Rng rng_ood = Rng::stream(spec.seed, kTestOodStream);
        Matrix in_rows =
            gaussian_rows(spec.n_test_in, spec.dim, spec.mu_value, sd, rng_in);
        Matrix ood_rows =
            gaussian_rows(spec.n_test_ood, spec.dim, -spec.mu_value, sd, rng_ood);
        test.inputs.resize(spec.n_test_in + spec.n_test_ood, spec.dim);
        test.inputs.topRows(spec.n_test_in) = in_rows;
        test.inputs.bottomRows(spec.n_test_ood) = ood_rows;
        test.targets = test.inputs.rowwise().norm();
        test.ood_flags.assign(spec.n_test_in, 0);
        test.ood_flags.insert(test.ood_flags.end(), spec.n_test_ood, 1);
    }
    return {std::move(train), std::move(test)};
}

std::pair<Matrix, Matrix> gen_null_pair(Index p, std::int64_t n1,
                                        std::int64_t n2, std::uint64_t seed) {
    Rng r1 = Rng::stream(seed, kTrainStream);
    Rng r2 = Rng::stream(seed, kTestInStream);
    return {gaussian_rows(n1, p, 0.0, 1.0, r1),
            gaussian_rows(n2, p, 0.0, 1.0, r2)};
}

LabeledVectors read_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw TruncatedFile("cannot open IDX file: " + path);
    }
    const std::uint32_t magic = read_be32(in);

    LabeledVectors out;
    if (magic == 0x00000801u) {
        const std::uint32_t n = read_be32(in);
        if (n > (1u << 30)) {
            throw DimensionOverflow("IDX label count out of range: " +
                                    std::to_string(n));
        }
        std::vector<unsigned char> bytes(n);
        in.read(reinterpret_cast<char*>(bytes.data()), n);
        if (!in) {
            throw TruncatedFile("IDX label payload shorter than header claims");
        }
        out.targets.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            out.targets[i] = static_cast<double>(bytes[i]);
        }
    } else if (magic == 0x00000803u) {
        const std::uint32_t n = read_be32(in);
        const std::uint32_t rows = read_be32(in);
        const std::uint32_t cols = read_be32(in);
        const std::uint64_t total =
            std::uint64_t(n) * std::uint64_t(rows) * std::uint64_t(cols);
        if (rows == 0 || cols == 0 || total > (std::uint64_t(1) << 31)) {
            throw DimensionOverflow("IDX image dimensions out of range: " +
                                    std::to_string(n) + "x" +
                                    std::to_string(rows) + "x" +
                                    std::to_string(cols));
        }
        std::vector<unsigned char> bytes(total);
        in.read(reinterpret_cast<char*>(bytes.data()),
                static_cast<std::streamsize>(total));
        if (!in) {
            throw TruncatedFile("IDX image payload shorter than header claims");
        }
        const Index d = static_cast<Index>(rows) * static_cast<Index>(cols);
        out.inputs.resize(n, d);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (Index j = 0; j < d; ++j) {
                out.inputs(i, j) =
                    static_cast<double>(bytes[std::uint64_t(i) * d + j]) / 255.0;
            }
        }
    } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "0x%08x", magic);
        throw BadMagic("unrecognized IDX magic " + std::string(buf) + " in " +
                       path);
    }
    return out;
}

LabeledVectors load_idx_pair(const std::string& images_path,
                             const std::string& labels_path) {
    LabeledVectors images = read_idx(images_path);
    if (images.inputs.rows() == 0) {
        throw BadMagic("expected an image IDX file at " + images_path);
    }
    LabeledVectors labels = read_idx(labels_path);
    if (labels.targets.size() != images.inputs.rows()) {
        throw DimensionMismatch("IDX image/label counts differ: " +
                                std::to_string(images.inputs.rows()) + " vs " +
                                std::to_string(labels.targets.size()));
    }
    images.targets = std::move(labels.targets);
    return images;
}

void write_csv(const LabeledVectors& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error("cannot open for writing: " + path);
    }
    for (Index j = 0; j < data.inputs.cols(); ++j) {
        out << 'x' << j << ',';
    }
    out << "target,ood_flag\n";
    char buf[32];
    for (Index i = 0; i < data.inputs.rows(); ++i) {
        for (Index j = 0; j < data.inputs.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.inputs(i, j));
            out << buf << ',';
        }
        std::snprintf(buf, sizeof(buf), "%.17g",
                      data.targets.size() > i ? data.targets[i] : 0.0);
        out << buf << ','
            << (i < static_cast<Index>(data.ood_flags.size()) ? data.ood_flags[i]
                                                              : 0)
            << '\n';
    }
}

}  // namespace arht::data
