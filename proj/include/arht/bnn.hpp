#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arht/errors.hpp"
#include "arht/rng.hpp"
#include "arht/types.hpp"

// Mean-field variational MLP. Every weight and bias carries a Gaussian
// posterior N(mu, softplus(rho)^2); forward passes draw concrete weights by
// reparameterization w = mu + softplus(rho) * eps. Layer l computes
//   z_l = (1 / sqrt(D_{l-1})) W_l h_{l-1} + b_l,
// with the activation applied between layers and the final layer acting as
// the task head. The embedding of an input is the post-activation output of
// the penultimate layer.

namespace arht::bnn {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1, Identity = 2 };
enum class Task : std::uint8_t { RegressionNorm = 0, Classification = 1 };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct VariationalLayer {
    Matrix mu_w;   // out x in
    Matrix rho_w;  // out x in
    Vector mu_b;   // out
    Vector rho_b;  // out

    Index in_dim() const { return mu_w.cols(); }
    Index out_dim() const { return mu_w.rows(); }
};

struct VariationalNet {
    std::vector<VariationalLayer> layers;
    Activation activation = Activation::Relu;
    double prior_std = 1.0;

    Index input_dim() const { return layers.front().in_dim(); }
    Index output_dim() const { return layers.back().out_dim(); }
    // Representation dimension: input width of the task head.
    Index embed_dim() const { return layers.back().in_dim(); }
    std::int64_t parameter_count() const;
};

// mu ~ N(0, 0.1^2) per parameter, rho = -3 everywhere (sigma ~= 0.0486),
// prior N(0, prior_std^2) on every parameter.
VariationalNet make_net(const std::vector<Index>& dims, Activation activation,
                        double prior_std, Rng& rng);

// One concrete draw from the posterior. The eps tensors are kept so the ELBO
// gradient can flow through the reparameterization.
struct SampledLayer {
    Matrix w;
    Vector b;
    Matrix eps_w;
    Vector eps_b;
};
using WeightSample = std::vector<SampledLayer>;

WeightSample sample_weights(const VariationalNet& net, Rng& rng);

// Task-head outputs for a batch (rows are inputs), using the given draw.
Matrix forward(const VariationalNet& net, const WeightSample& sample,
               const Matrix& inputs);

// Penultimate-layer representations for a batch.
Matrix forward_embedding(const VariationalNet& net, const WeightSample& sample,
                         const Matrix& inputs);

// Closed-form KL(q || prior) summed over all parameters (diagonal Gaussians):
// sum_i log(sigma_p / sigma_i) + (sigma_i^2 + mu_i^2) / (2 sigma_p^2) - 1/2.
double kl_to_prior(const VariationalNet& net);

struct ElboParts {
    double loss = 0.0;
    double task_term = 0.0;
    double kl_term = 0.0;
};

// loss = task(forward(inputs), targets) + kl_weight * KL(q || prior).
// RegressionNorm uses 0.5 * mean squared error on a scalar head;
// Classification uses mean softmax cross-entropy with integer targets.
// Throws NonFiniteLoss when the forward pass produces a non-finite value.
ElboParts elbo(const VariationalNet& net, const Matrix& inputs,
               const Vector& targets, Task task, const WeightSample& sample,
               double kl_weight);

struct LayerGradients {
    Matrix mu_w;
    Matrix rho_w;
    Vector mu_b;
    Vector rho_b;
};
using Gradients = std::vector<LayerGradients>;

// Same contract as elbo() but also returns d loss / d (mu, rho) for every
// layer, with the eps draw held fixed.
ElboParts elbo_with_grads(const VariationalNet& net, const Matrix& inputs,
                          const Vector& targets, Task task,
                          const WeightSample& sample, double kl_weight,
                          Gradients& grads);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-2;
    double kl_weight = 1.0;  // scale on the full-dataset KL per epoch
    std::uint64_t seed = 42;
    Task task = Task::RegressionNorm;
    double weight_decay = 1e-5;  // applied to mu only
};

// Minimizes -ELBO with one posterior draw per batch and adaptive per-parameter
// step scaling (Adam moments). The per-batch KL multiplier is
// config.kl_weight / num_batches so one epoch applies the full KL once.
// Returns the per-epoch mean loss trace; throws NonFiniteLoss with the epoch
// index when the loss leaves the finite range.
std::vector<ElboParts> train(VariationalNet& net, const Matrix& inputs,
                             const Vector& targets, const TrainConfig& config);

// A batch of representations plus provenance: which input produced each row
// and which posterior draw it came from.
struct EmbeddingSet {
    Matrix vectors;  // k x embed_dim
    std::vector<std::int64_t> input_index;
    std::vector<std::int64_t> weight_sample_index;

    Index size() const { return vectors.rows(); }
    Index dim() const { return vectors.cols(); }
};

// k representations of one input, each under a fresh posterior draw.
EmbeddingSet embed(const VariationalNet& net, const Vector& input, int k,
                   Rng& rng);

// s representations of every row of `inputs` (s * n rows total, input-major).
EmbeddingSet embed_training_set(const VariationalNet& net, const Matrix& inputs,
                                int s, Rng& rng);

}  // namespace arht::bnn
