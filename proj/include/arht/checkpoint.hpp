#pragma once

#include <cstdint>
#include <string>

#include "arht/bnn.hpp"

namespace arht::bnn {

// Self-describing binary container: layer shapes, mu and rho tensors,
// activation tag, prior_std, and the training seed. Round-trips bit-exactly.

struct Checkpoint {
    VariationalNet net;
    std::uint64_t train_seed = 0;
};

void save_checkpoint(const VariationalNet& net, std::uint64_t train_seed,
                     const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace arht::bnn
