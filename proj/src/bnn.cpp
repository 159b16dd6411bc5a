#include "arht/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arht::bnn {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x > 0.0 ? 1.0 / (1.0 + std::exp(-x))
                   : std::exp(x) / (1.0 + std::exp(x));
}

Matrix softplus_m(const Matrix& m) {
    return m.unaryExpr([](double v) { return softplus(v); });
}

Vector softplus_v(const Vector& v) {
    return v.unaryExpr([](double x) { return softplus(x); });
}

Matrix apply_activation(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::Relu:
            return z.cwiseMax(0.0);
        case Activation::Tanh:
            return z.array().tanh().matrix();
        case Activation::Identity:
            return z;
    }
    return z;
}

// Derivative expressed through the post-activation value.
Matrix activation_grad(const Matrix& post, Activation a) {
    switch (a) {
        case Activation::Relu:
            return (post.array() > 0.0).cast<double>().matrix();
        case Activation::Tanh:
            return (1.0 - post.array().square()).matrix();
        case Activation::Identity:
            return Matrix::Ones(post.rows(), post.cols());
    }
    return Matrix::Ones(post.rows(), post.cols());
}

// Forward pass keeping the post-activation of every layer (index 0 holds the
// input batch). The last entry is the raw head output.
std::vector<Matrix> forward_states(const VariationalNet& net,
                                   const WeightSample& sample,
                                   const Matrix& inputs) {
    std::vector<Matrix> states;
    states.reserve(net.layers.size() + 1);
    states.push_back(inputs);
    for (std::size_t l = 0; l < sample.size(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(
                                 sample[l].w.cols()));
        Matrix z = (states.back() * sample[l].w.transpose()) * scale;
        z.rowwise() += sample[l].b.transpose();
        if (l + 1 < sample.size()) {
            states.push_back(apply_activation(z, net.activation));
        } else {
            states.push_back(std::move(z));
        }
    }
    return states;
}

struct TaskLossResult {
    double value = 0.0;
    Matrix grad;  // d loss / d head output
};

TaskLossResult task_loss(const Matrix& output, const Vector& targets, Task task,
                         bool with_grad) {
    TaskLossResult out;
    const auto n = static_cast<double>(output.rows());
    if (task == Task::RegressionNorm) {
        Vector err = output.col(0) - targets;
        out.value = 0.5 * err.squaredNorm() / n;
        if (with_grad) {
            out.grad = (err / n).matrix();
        }
    } else {
        // Softmax cross-entropy over logits.
        Matrix shifted = output.colwise() - output.rowwise().maxCoeff();
        Matrix expm = shifted.array().exp().matrix();
        Vector norm = expm.rowwise().sum();
        double nll = 0.0;
        for (Index i = 0; i < output.rows(); ++i) {
            auto cls = static_cast<Index>(std::llround(targets[i]));
            nll -= shifted(i, cls) - std::log(norm[i]);
        }
        out.value = nll / n;
        if (with_grad) {
            out.grad = expm.array().colwise() / norm.array();
            for (Index i = 0; i < output.rows(); ++i) {
                auto cls = static_cast<Index>(std::llround(targets[i]));
                out.grad(i, cls) -= 1.0;
            }
            out.grad /= n;
        }
    }
    return out;
}

// Adam moments for one tensor shape.
struct Moments {
    Matrix m_mu_w, v_mu_w, m_rho_w, v_rho_w;
    Vector m_mu_b, v_mu_b, m_rho_b, v_rho_b;
};

template <typename Tensor>
void adam_step(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
               double lr, long t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw Error("unknown activation: " + name);
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

std::int64_t VariationalNet::parameter_count() const {
    std::int64_t total = 0;
    for (const auto& layer : layers) {
        total += 2 * (layer.mu_w.size() + layer.mu_b.size());
    }
    return total;
}

VariationalNet make_net(const std::vector<Index>& dims, Activation activation,
                        double prior_std, Rng& rng) {
    if (dims.size() < 2) {
        throw Error("a net needs at least one layer (two dims)");
    }
    VariationalNet net;
    net.activation = activation;
    net.prior_std = prior_std;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        VariationalLayer layer;
        layer.mu_w = Matrix::NullaryExpr(
            dims[i + 1], dims[i], [&rng]() { return 0.1 * rng.next_gaussian(); });
        layer.mu_b = Vector::NullaryExpr(
            dims[i + 1], [&rng]() { return 0.1 * rng.next_gaussian(); });
        layer.rho_w = Matrix::Constant(dims[i + 1], dims[i], -3.0);
        layer.rho_b = Vector::Constant(dims[i + 1], -3.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

WeightSample sample_weights(const VariationalNet& net, Rng& rng) {
    WeightSample sample;
    sample.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        SampledLayer s;
        s.eps_w = Matrix::NullaryExpr(layer.mu_w.rows(), layer.mu_w.cols(),
                                      [&rng]() { return rng.next_gaussian(); });
        s.eps_b = Vector::NullaryExpr(layer.mu_b.size(),
                                      [&rng]() { return rng.next_gaussian(); });
        s.w = layer.mu_w + softplus_m(layer.rho_w).cwiseProduct(s.eps_w);
        s.b = layer.mu_b + softplus_v(layer.rho_b).cwiseProduct(s.eps_b);
        sample.push_back(std::move(s));
    }
    return sample;
}

Matrix forward(const VariationalNet& net, const WeightSample& sample,
               const Matrix& inputs) {
    return forward_states(net, sample, inputs).back();
}

Matrix forward_embedding(const VariationalNet& net, const WeightSample& sample,
                         const Matrix& inputs) {
    Matrix h = inputs;
    for (std::size_t l = 0; l + 1 < sample.size(); ++l) {
        const double scale =
            1.0 / std::sqrt(static_cast<double>(sample[l].w.cols()));
        Matrix z = (h * sample[l].w.transpose()) * scale;
        z.rowwise() += sample[l].b.transpose();
        h = apply_activation(z, net.activation);
    }
    return h;
}

double kl_to_prior(const VariationalNet& net) {
    const double sp = net.prior_std;
    const double inv2sp2 = 1.0 / (2.0 * sp * sp);
    double kl = 0.0;
    auto add = [&](double mu, double rho) {
        const double sigma = softplus(rho);
        kl += std::log(sp / sigma) + (sigma * sigma + mu * mu) * inv2sp2 - 0.5;
    };
    for (const auto& layer : net.layers) {
        for (Index i = 0; i < layer.mu_w.size(); ++i) {
            add(layer.mu_w.data()[i], layer.rho_w.data()[i]);
        }
        for (Index i = 0; i < layer.mu_b.size(); ++i) {
            add(layer.mu_b[i], layer.rho_b[i]);
        }
    }
    return kl;
}

ElboParts elbo(const VariationalNet& net, const Matrix& inputs,
               const Vector& targets, Task task, const WeightSample& sample,
               double kl_weight) {
    Matrix output = forward(net, sample, inputs);
    TaskLossResult tl = task_loss(output, targets, task, /*with_grad=*/false);
    ElboParts parts;
    parts.task_term = tl.value;
    parts.kl_term = kl_to_prior(net);
    parts.loss = parts.task_term + kl_weight * parts.kl_term;
    if (!std::isfinite(parts.loss)) {
        throw NonFiniteLoss("forward pass produced a non-finite loss");
    }
    return parts;
}

ElboParts elbo_with_grads(const VariationalNet& net, const Matrix& inputs,
                          const Vector& targets, Task task,
                          const WeightSample& sample, double kl_weight,
                          Gradients& grads) {
    const std::size_t L = net.layers.size();
    std::vector<Matrix> states = forward_states(net, sample, inputs);
    TaskLossResult tl = task_loss(states.back(), targets, task, true);

    grads.resize(L);
    Matrix g = tl.grad;  // d loss / d z_l, starting at the head
    for (std::size_t l = L; l-- > 0;) {
        const double scale =
            1.0 / std::sqrt(static_cast<double>(sample[l].w.cols()));
        Matrix gw = g.transpose() * states[l] * scale;
        Vector gb = g.colwise().sum().transpose();
        if (l > 0) {
            Matrix gh = (g * sample[l].w) * scale;
            g = gh.cwiseProduct(activation_grad(states[l], net.activation));
        }
        const auto& layer = net.layers[l];
        const double sp2 = net.prior_std * net.prior_std;
        Matrix sig_w = softplus_m(layer.rho_w);
        Vector sig_b = softplus_v(layer.rho_b);
        Matrix gate_w =
            layer.rho_w.unaryExpr([](double r) { return sigmoid(r); });
        Vector gate_b =
            layer.rho_b.unaryExpr([](double r) { return sigmoid(r); });

        LayerGradients& lg = grads[l];
        lg.mu_w = gw + kl_weight / sp2 * layer.mu_w;
        lg.mu_b = gb + kl_weight / sp2 * layer.mu_b;
        lg.rho_w = gw.cwiseProduct(sample[l].eps_w).cwiseProduct(gate_w) +
                   kl_weight * (sig_w.array() / sp2 - sig_w.array().inverse())
                                   .matrix()
                                   .cwiseProduct(gate_w);
        lg.rho_b = gb.cwiseProduct(sample[l].eps_b).cwiseProduct(gate_b) +
                   kl_weight * (sig_b.array() / sp2 - sig_b.array().inverse())
                                   .matrix()
                                   .cwiseProduct(gate_b);
    }

    ElboParts parts;
    parts.task_term = tl.value;
    parts.kl_term = kl_to_prior(net);
    parts.loss = parts.task_term + kl_weight * parts.kl_term;
    if (!std::isfinite(parts.loss)) {
        throw NonFiniteLoss("forward pass produced a non-finite loss");
    }
    return parts;
}

std::vector<ElboParts> train(VariationalNet& net, const Matrix& inputs,
                             const Vector& targets, const TrainConfig& config) {
    if (inputs.rows() == 0) {
        throw EmptyDataset("training set is empty");
    }
    if (inputs.rows() != targets.size()) {
        throw DimensionMismatch("inputs and targets disagree on sample count");
    }
    if (config.epochs < 1 || config.batch_size < 1) {
        throw Error("epochs and batch_size must be at least 1");
    }
    const Index n = inputs.rows();
    const Index batch = std::min<Index>(config.batch_size, n);
    const Index num_batches = (n + batch - 1) / batch;
    const double kl_w = config.kl_weight / static_cast<double>(num_batches);

    Rng rng(Rng::stream(config.seed, 0x7261696EULL));
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});

    std::vector<Moments> moments(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        moments[l].m_mu_w = Matrix::Zero(layer.mu_w.rows(), layer.mu_w.cols());
        moments[l].v_mu_w = moments[l].m_mu_w;
        moments[l].m_rho_w = moments[l].m_mu_w;
        moments[l].v_rho_w = moments[l].m_mu_w;
        moments[l].m_mu_b = Vector::Zero(layer.mu_b.size());
        moments[l].v_mu_b = moments[l].m_mu_b;
        moments[l].m_rho_b = moments[l].m_mu_b;
        moments[l].v_rho_b = moments[l].m_mu_b;
    }

    std::vector<ElboParts> trace;
    trace.reserve(config.epochs);
    Gradients grads;
    long t = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the training stream keeps the trace reproducible.
        for (Index i = n - 1; i > 0; --i) {
            const auto j = static_cast<Index>(rng.next_u64() %
                                              static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
        ElboParts epoch_mean;
        for (Index b = 0; b < num_batches; ++b) {
            const Index lo = b * batch;
            const Index hi = std::min(lo + batch, n);
            Matrix xb(hi - lo, inputs.cols());
            Vector yb(hi - lo);
            for (Index i = lo; i < hi; ++i) {
                xb.row(i - lo) = inputs.row(order[i]);
                yb[i - lo] = targets[order[i]];
            }
            WeightSample sample = sample_weights(net, rng);
            ElboParts parts;
            try {
                parts = elbo_with_grads(net, xb, yb, config.task, sample, kl_w,
                                        grads);
            } catch (const NonFiniteLoss&) {
                throw NonFiniteLoss("non-finite loss at epoch " +
                                    std::to_string(epoch));
            }
            ++t;
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                auto& layer = net.layers[l];
                auto& mom = moments[l];
                // Decay on mu only.
                grads[l].mu_w += config.weight_decay * layer.mu_w;
                grads[l].mu_b += config.weight_decay * layer.mu_b;
                adam_step(layer.mu_w, grads[l].mu_w, mom.m_mu_w, mom.v_mu_w,
                          config.learning_rate, t);
                adam_step(layer.rho_w, grads[l].rho_w, mom.m_rho_w, mom.v_rho_w,
                          config.learning_rate, t);
                adam_step(layer.mu_b, grads[l].mu_b, mom.m_mu_b, mom.v_mu_b,
                          config.learning_rate, t);
                adam_step(layer.rho_b, grads[l].rho_b, mom.m_rho_b, mom.v_rho_b,
                          config.learning_rate, t);
            }
            epoch_mean.loss += parts.loss;
            epoch_mean.task_term += parts.task_term;
            epoch_mean.kl_term += parts.kl_term;
        }
        const auto nb = static_cast<double>(num_batches);
        epoch_mean.loss /= nb;
        epoch_mean.task_term /= nb;
        epoch_mean.kl_term /= nb;
        trace.push_back(epoch_mean);
    }
    return trace;
}

EmbeddingSet embed(const VariationalNet& net, const Vector& input, int k,
                   Rng& rng) {
    EmbeddingSet set;
    set.vectors.resize(k, net.embed_dim());
    set.input_index.resize(k, 0);
    set.weight_sample_index.resize(k);
    Matrix row = input.transpose();
    for (int j = 0; j < k; ++j) {
        WeightSample sample = sample_weights(net, rng);
        set.vectors.row(j) = forward_embedding(net, sample, row).row(0);
        set.weight_sample_index[j] = j;
    }
    return set;
}

EmbeddingSet embed_training_set(const VariationalNet& net, const Matrix& inputs,
                                int s, Rng& rng) {
    const Index n = inputs.rows();
    EmbeddingSet set;
    set.vectors.resize(n * s, net.embed_dim());
    set.input_index.resize(n * s);
    set.weight_sample_index.resize(n * s);
    for (Index i = 0; i < n; ++i) {
        Matrix row = inputs.row(i);
        for (int j = 0; j < s; ++j) {
            WeightSample sample = sample_weights(net, rng);
            const Index r = i * s + j;
            set.vectors.row(r) = forward_embedding(net, sample, row).row(0);
            set.input_index[r] = i;
            set.weight_sample_index[r] = j;
        }
    }
    return set;
}

}  // namespace arht::bnn
