#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gansic/matrix.hpp"
#include "gansic/rng.hpp"

namespace gansic {

enum class Activation { Identity, Tanh, Sigmoid, Softmax };
enum class Mode { Train, Eval };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Per-unit batch normalization state. Normalization sits between the affine
// transform and the activation; train mode normalizes with batch statistics,
// eval mode with the running averages (momentum 0.9).
struct BatchNormState {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;

    static BatchNormState identity(std::size_t units);
};

struct Layer {
    DenseMatrix weight;  // in x out; y = x * W + b
    std::vector<double> bias;
    std::optional<BatchNormState> batchnorm;
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

struct NetworkParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    void validate() const;
};

struct LayerSpec {
    std::size_t units = 0;
    Activation activation = Activation::Tanh;
    bool batchnorm = false;
};

// Glorot-uniform weights, zero biases, identity batch norm.
NetworkParams make_mlp(std::size_t input_dim, const std::vector<LayerSpec>& layers, Rng& rng);

struct LayerCache {
    DenseMatrix post_act;  // B x out
    DenseMatrix xhat;      // normalized pre-activation when batchnorm is present
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // biased
    std::vector<double> inv_std;
};

struct ForwardCache {
    Mode mode = Mode::Eval;
    DenseMatrix input;
    std::vector<LayerCache> layers;
    bool valid = false;

    const DenseMatrix& output() const { return layers.back().post_act; }
};

// Batched forward pass; `cache` is required for a later backward pass and for
// committing batch-norm running statistics. The network itself is never
// mutated here: running stats move only through commit_batchnorm_stats.
DenseMatrix mlp_forward(const NetworkParams& net, const DenseMatrix& input, Mode mode,
                        ForwardCache* cache = nullptr);
std::vector<double> mlp_forward(const NetworkParams& net, const std::vector<double>& input,
                                Mode mode);

// Applies the momentum update for the batch statistics recorded in a
// train-mode cache.
void commit_batchnorm_stats(NetworkParams& net, const ForwardCache& cache);

struct LayerGrads {
    DenseMatrix weight;
    std::vector<double> bias;
    std::vector<double> gamma;
    std::vector<double> beta;
};

struct Gradients {
    std::vector<LayerGrads> layers;
};

Gradients make_zero_gradients(const NetworkParams& net);
void accumulate(Gradients& dst, const Gradients& src);
void scale(Gradients& g, double factor);

// Backpropagation through the cached forward pass.
//   grad_output      - dL/d(post-activation output), B x out
//   grad_input       - optional dL/d(input), B x in
//   extra_preact_grad- optional extra gradient added w.r.t. the final layer's
//                      pre-activation values (the fused softmax/cross-entropy
//                      path feeds the classifier gradient through here)
//   param_grads      - when false only grad_input is produced
Gradients mlp_backward(const NetworkParams& net, const ForwardCache& cache,
                       const DenseMatrix& grad_output, DenseMatrix* grad_input = nullptr,
                       const DenseMatrix* extra_preact_grad = nullptr, bool param_grads = true);

// Canonical parameter enumeration: per layer weight row-major, bias, then
// gamma and beta when batch norm is present. Running statistics are not
// trainable and are excluded.
std::size_t trainable_count(const NetworkParams& net);
std::vector<double*> trainable_slots(NetworkParams& net);
std::vector<double> flatten_gradients(const Gradients& g);

// FNV-1a over the raw bytes of every parameter including running stats;
// used by snapshot bookkeeping and state-freeze assertions in tests.
std::uint64_t params_checksum(const NetworkParams& net);

}  // namespace gansic
