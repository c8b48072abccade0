#pragma once

#include <filesystem>
#include <vector>

#include "gansic/adam.hpp"
#include "gansic/channel.hpp"
#include "gansic/classic.hpp"
#include "gansic/nn.hpp"
#include "gansic/rng.hpp"

namespace gansic {

// Q layers of K per-user classification kernels. Kernel (q, k) consumes the
// received signal concatenated with the other users' previous-layer beliefs
// (ascending user order) and emits a softmax over the constellation.
struct DeepSicNet {
    std::size_t layers_q = 0;
    std::size_t users = 0;
    Constellation constellation;
    std::vector<std::vector<NetworkParams>> kernels;  // [Q][K]

    std::size_t belief_width() const { return constellation.size(); }
    std::size_t receivers() const;
    void validate() const;
};

// Fresh net: every kernel is input -> hidden(tanh) -> softmax, Glorot init.
DeepSicNet make_deepsic(std::size_t Q, std::size_t K, std::size_t R,
                        const Constellation& cons, std::size_t hidden, Rng& rng);

// Belief matrices for every layer and user plus the forward caches needed to
// backpropagate through the whole stack.
struct DeepSicTrace {
    std::vector<std::vector<DenseMatrix>> beliefs;   // [Q][K], each N x |S|
    std::vector<std::vector<ForwardCache>> caches;   // [Q][K]
};

// Batched forward pass; returns the final layer's beliefs per user.
std::vector<DenseMatrix> deepsic_forward(const DeepSicNet& net, const DenseMatrix& ys, Mode mode,
                                         DeepSicTrace* trace = nullptr);

// Hard decisions: N x K symbol values, argmax with lowest-index tie-break.
DenseMatrix deepsic_detect(const DeepSicNet& net, const DenseMatrix& ys);
std::vector<double> deepsic_detect(const DeepSicNet& net, std::span<const double> y);

// (received, transmitted) supervision; labels are constellation indices in
// row-major N x K order.
struct LabeledBatch {
    DenseMatrix ys;           // N x R
    std::vector<int> labels;  // N * K
    std::size_t users = 0;

    std::size_t size() const { return ys.rows; }
    void validate(const DeepSicNet& net) const;
};

enum class LossLayers { All, Last };

struct DeepSicGrads {
    std::vector<std::vector<Gradients>> kernels;  // [Q][K]
    DenseMatrix y_grad;                           // N x R, d(loss)/d(received)
};

// Cross-entropy summed over users (and over layers unless Last), averaged
// over the batch. Gradients flow end-to-end through the belief
// concatenations; y_grad is produced for callers that train a generator
// through the detector loss.
double deepsic_loss_and_grads(const DeepSicNet& net, const LabeledBatch& batch,
                              LossLayers loss_layers, DeepSicGrads* grads);

// Per-kernel Adam over the joint end-to-end gradient.
struct DeepSicTrainer {
    AdamConfig adam;
    LossLayers loss_layers = LossLayers::All;
    std::vector<std::vector<AdamState>> states;  // [Q][K]

    DeepSicTrainer() = default;
    explicit DeepSicTrainer(const DeepSicNet& net, AdamConfig cfg = {},
                            LossLayers layers = LossLayers::All);

    // One gradient step on the batch; returns the batch loss before the step.
    double train_batch(DeepSicNet& net, const LabeledBatch& batch);
};

// Supervised training: shuffled minibatches, `epochs` passes over `data`.
// Returns the mean minibatch loss per epoch.
std::vector<double> train_deepsic(DeepSicNet& net, DeepSicTrainer& trainer,
                                  const LabeledBatch& data, std::size_t epochs,
                                  std::size_t batch_size, Rng& rng);

// Draw `n` uniform symbol vectors and push them through the channel.
LabeledBatch sample_labeled_batch(const ChannelModel& model, const Constellation& cons,
                                  std::size_t n, Rng& rng);

void save_deepsic(const std::filesystem::path& path, const DeepSicNet& net);
DeepSicNet load_deepsic(const std::filesystem::path& path);

}  // namespace gansic
