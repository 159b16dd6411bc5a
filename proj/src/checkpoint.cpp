#include "arht/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace arht::bnn {

namespace {

constexpr char kMagic[8] = {'V', 'B', 'N', 'N', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw CheckpointError("checkpoint truncated");
    }
    return value;
}

void write_doubles(std::ostream& out, const double* data, std::int64_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::int64_t count) {
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) {
        throw CheckpointError("checkpoint truncated");
    }
}

}  // namespace

void save_checkpoint(const VariationalNet& net, std::uint64_t train_seed,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(net.activation));
    write_pod(out, net.prior_std);
    write_pod(out, train_seed);
    write_pod(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
        write_pod(out, static_cast<std::uint32_t>(layer.in_dim()));
        write_pod(out, static_cast<std::uint32_t>(layer.out_dim()));
    }
    for (const auto& layer : net.layers) {
        write_doubles(out, layer.mu_w.data(), layer.mu_w.size());
        write_doubles(out, layer.rho_w.data(), layer.rho_w.size());
        write_doubles(out, layer.mu_b.data(), layer.mu_b.size());
        write_doubles(out, layer.rho_b.data(), layer.rho_b.size());
    }
    if (!out) {
        throw CheckpointError("write failed: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open checkpoint: " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("not a checkpoint file: " + path);
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " +
                              std::to_string(version));
    }
    Checkpoint ckpt;
    const auto activation = read_pod<std::uint32_t>(in);
    if (activation > 2) {
        throw CheckpointError("bad activation tag");
    }
    ckpt.net.activation = static_cast<Activation>(activation);
    ckpt.net.prior_std = read_pod<double>(in);
    ckpt.train_seed = read_pod<std::uint64_t>(in);
    const auto num_layers = read_pod<std::uint32_t>(in);
    if (num_layers == 0 || num_layers > 1024) {
        throw CheckpointError("implausible layer count");
    }
    std::vector<std::pair<Index, Index>> shapes;
    shapes.reserve(num_layers);
    for (std::uint32_t l = 0; l < num_layers; ++l) {
        const auto in_dim = read_pod<std::uint32_t>(in);
        const auto out_dim = read_pod<std::uint32_t>(in);
        shapes.emplace_back(in_dim, out_dim);
    }
    for (const auto& [in_dim, out_dim] : shapes) {
        VariationalLayer layer;
        layer.mu_w.resize(out_dim, in_dim);
        layer.rho_w.resize(out_dim, in_dim);
        layer.mu_b.resize(out_dim);
        layer.rho_b.resize(out_dim);
        read_doubles(in, layer.mu_w.data(), layer.mu_w.size());
        read_doubles(in, layer.rho_w.data(), layer.rho_w.size());
        read_doubles(in, layer.mu_b.data(), layer.mu_b.size());
        read_doubles(in, layer.rho_b.data(), layer.rho_b.size());
        ckpt.net.layers.push_back(std::move(layer));
    }
    return ckpt;
}

}  // namespace arht::bnn
