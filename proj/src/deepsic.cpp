#include "gansic/deepsic.hpp"

#include <algorithm>
#include <stdexcept>

#include "gansic/checkpoint.hpp"
#include "gansic/losses.hpp"

namespace gansic {

std::size_t DeepSicNet::receivers() const {
    const std::size_t in = kernels.at(0).at(0).input_dim();
    return in - (users - 1) * belief_width();
}

void DeepSicNet::validate() const {
    if (layers_q == 0 || users == 0) throw std::invalid_argument("deepsic: empty shape");
    constellation.validate();
    if (kernels.size() != layers_q) throw std::invalid_argument("deepsic: kernel row count != Q");
    const std::size_t M = belief_width();
    const NetworkParams& ref = kernels.at(0).at(0);
    if (ref.input_dim() <= (users - 1) * M)
        throw std::invalid_argument("deepsic: kernel input too narrow for belief slots");
    for (const auto& row : kernels) {
        if (row.size() != users) throw std::invalid_argument("deepsic: kernel column count != K");
        for (const NetworkParams& kernel : row) {
            kernel.validate();
            if (kernel.input_dim() != ref.input_dim() || kernel.output_dim() != M)
                throw std::invalid_argument("deepsic: kernels are not structurally identical");
            if (kernel.layers.size() != ref.layers.size())
                throw std::invalid_argument("deepsic: kernels are not structurally identical");
        }
    }
}

DeepSicNet make_deepsic(std::size_t Q, std::size_t K, std::size_t R,
                        const Constellation& cons, std::size_t hidden, Rng& rng) {
    cons.validate();
    if (Q == 0 || K == 0 || R == 0 || hidden == 0)
        throw std::invalid_argument("make_deepsic: empty shape");
    DeepSicNet net;
    net.layers_q = Q;
    net.users = K;
    net.constellation = cons;
    const std::size_t in = R + (K - 1) * cons.size();
    net.kernels.resize(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        net.kernels[q].reserve(K);
        for (std::size_t k = 0; k < K; ++k)
            net.kernels[q].push_back(make_mlp(
                in, {{hidden, Activation::Tanh, false},
                     {cons.size(), Activation::Softmax, false}},
                rng));
    }
    net.validate();
    return net;
}

namespace {

// Kernel input: received signal columns first, then the other users' beliefs
// in ascending user order.
DenseMatrix kernel_input(const DenseMatrix& ys, const std::vector<DenseMatrix>& beliefs,
                         std::size_t k) {
    const std::size_t N = ys.rows;
    const std::size_t R = ys.cols;
    const std::size_t K = beliefs.size();
    const std::size_t M = beliefs[0].cols;
    DenseMatrix x(N, R + (K - 1) * M);
    for (std::size_t n = 0; n < N; ++n) {
        double* row = x.row(n);
        std::copy(ys.row(n), ys.row(n) + R, row);
        std::size_t offset = R;
        for (std::size_t j = 0; j < K; ++j) {
            if (j == k) continue;
            std::copy(beliefs[j].row(n), beliefs[j].row(n) + M, row + offset);
            offset += M;
        }
    }
    return x;
}

std::vector<DenseMatrix> uniform_beliefs(std::size_t K, std::size_t N, std::size_t M) {
    std::vector<DenseMatrix> b(K, DenseMatrix(N, M));
    for (DenseMatrix& m : b)
        for (double& v : m.data) v = 1.0 / static_cast<double>(M);
    return b;
}

}  // namespace

std::vector<DenseMatrix> deepsic_forward(const DeepSicNet& net, const DenseMatrix& ys, Mode mode,
                                         DeepSicTrace* trace) {
    net.validate();
    if (ys.cols != net.receivers())
        throw std::invalid_argument("deepsic_forward: received width does not match net");
    const std::size_t K = net.users;
    const std::size_t M = net.belief_width();

    if (trace) {
        trace->beliefs.assign(net.layers_q, {});
        trace->caches.assign(net.layers_q, std::vector<ForwardCache>(K));
    }

    std::vector<DenseMatrix> prev = uniform_beliefs(K, ys.rows, M);
    for (std::size_t q = 0; q < net.layers_q; ++q) {
        std::vector<DenseMatrix> next(K);
        for (std::size_t k = 0; k < K; ++k) {
            const DenseMatrix x = kernel_input(ys, prev, k);
            ForwardCache* cache = trace ? &trace->caches[q][k] : nullptr;
            next[k] = mlp_forward(net.kernels[q][k], x, mode, cache);
        }
        if (trace) trace->beliefs[q] = next;
        prev = std::move(next);
    }
    return prev;
}

DenseMatrix deepsic_detect(const DeepSicNet& net, const DenseMatrix& ys) {
    const std::vector<DenseMatrix> beliefs = deepsic_forward(net, ys, Mode::Eval);
    DenseMatrix hard(ys.rows, net.users);
    for (std::size_t k = 0; k < net.users; ++k)
        for (std::size_t n = 0; n < ys.rows; ++n)
            hard.at(n, k) = net.constellation.symbols[argmax_index(beliefs[k].row_span(n))];
    return hard;
}

std::vector<double> deepsic_detect(const DeepSicNet& net, std::span<const double> y) {
    DenseMatrix ys(1, y.size());
    std::copy(y.begin(), y.end(), ys.data.begin());
    const DenseMatrix hard = deepsic_detect(net, ys);
    return hard.data;
}

void LabeledBatch::validate(const DeepSicNet& net) const {
    if (ys.rows == 0) throw std::invalid_argument("labeled batch is empty");
    if (users != net.users || ys.cols != net.receivers())
        throw std::invalid_argument("labeled batch shape does not match net");
    if (labels.size() != ys.rows * users)
        throw std::invalid_argument("label count does not match batch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= net.belief_width())
            throw std::invalid_argument("label outside constellation index range");
}

double deepsic_loss_and_grads(const DeepSicNet& net, const LabeledBatch& batch,
                              LossLayers loss_layers, DeepSicGrads* grads) {
    batch.validate(net);
    const std::size_t N = batch.size();
    const std::size_t K = net.users;
    const std::size_t M = net.belief_width();
    const std::size_t R = net.receivers();

    DeepSicTrace trace;
    deepsic_forward(net, batch.ys, Mode::Train, &trace);

    std::vector<int> user_labels(N);
    double loss = 0.0;
    for (std::size_t q = 0; q < net.layers_q; ++q) {
        if (loss_layers == LossLayers::Last && q + 1 != net.layers_q) continue;
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) user_labels[n] = batch.labels[n * K + k];
            loss += cross_entropy_mean(trace.beliefs[q][k], user_labels);
        }
    }
    if (!grads) return loss;

    grads->kernels.assign(net.layers_q, std::vector<Gradients>(K));
    grads->y_grad = DenseMatrix(N, R);

    // Downstream gradient arriving at each kernel's post-softmax output.
    std::vector<DenseMatrix> belief_grad(K, DenseMatrix(N, M));
    for (std::size_t q = net.layers_q; q-- > 0;) {
        std::vector<DenseMatrix> upstream(K, DenseMatrix(N, M));
        for (std::size_t k = 0; k < K; ++k) {
            const bool ce_here = loss_layers == LossLayers::All || q + 1 == net.layers_q;
            DenseMatrix ce_grad;
            if (ce_here) {
                for (std::size_t n = 0; n < N; ++n) user_labels[n] = batch.labels[n * K + k];
                ce_grad = ce_softmax_preact_grad(trace.beliefs[q][k], user_labels);
            }
            DenseMatrix gi;
            grads->kernels[q][k] =
                mlp_backward(net.kernels[q][k], trace.caches[q][k], belief_grad[k], &gi,
                             ce_here ? &ce_grad : nullptr);

            // Scatter the input gradient: received-signal part accumulates into
            // y_grad, belief parts flow to the producing kernels one layer up.
            for (std::size_t n = 0; n < N; ++n) {
                const double* gr = gi.row(n);
                double* yg = grads->y_grad.row(n);
                for (std::size_t c = 0; c < R; ++c) yg[c] += gr[c];
                if (q == 0) continue;  // layer-0 inputs are the fixed uniform prior
                std::size_t offset = R;
                for (std::size_t j = 0; j < K; ++j) {
                    if (j == k) continue;
                    double* target = upstream[j].row(n);
                    for (std::size_t c = 0; c < M; ++c) target[c] += gr[offset + c];
                    offset += M;
                }
            }
        }
        belief_grad = std::move(upstream);
    }
    return loss;
}

DeepSicTrainer::DeepSicTrainer(const DeepSicNet& net, AdamConfig cfg, LossLayers layers)
    : adam(cfg), loss_layers(layers) {
    states.resize(net.layers_q);
    for (std::size_t q = 0; q < net.layers_q; ++q)
        for (std::size_t k = 0; k < net.users; ++k)
            states[q].emplace_back(trainable_count(net.kernels[q][k]), cfg);
}

double DeepSicTrainer::train_batch(DeepSicNet& net, const LabeledBatch& batch) {
    if (states.size() != net.layers_q || states.at(0).size() != net.users)
        throw std::invalid_argument("trainer state does not match net shape");
    DeepSicGrads grads;
    const double loss = deepsic_loss_and_grads(net, batch, loss_layers, &grads);
    for (std::size_t q = 0; q < net.layers_q; ++q) {
        for (std::size_t k = 0; k < net.users; ++k) {
            std::vector<double*> slots = trainable_slots(net.kernels[q][k]);
            adam_step(states[q][k], slots, flatten_gradients(grads.kernels[q][k]));
        }
    }
    return loss;
}

std::vector<double> train_deepsic(DeepSicNet& net, DeepSicTrainer& trainer,
                                  const LabeledBatch& data, std::size_t epochs,
                                  std::size_t batch_size, Rng& rng) {
    data.validate(net);
    if (epochs == 0 || batch_size == 0)
        throw std::invalid_argument("train_deepsic: empty training budget");
    const std::size_t N = data.size();
    const std::size_t K = data.users;
    const std::size_t R = data.ys.cols;

    std::vector<std::size_t> order(N);
    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = 0; i < N; ++i) order[i] = i;
        for (std::size_t i = N; i-- > 1;) {
            const std::size_t j = rng.uniform_int(i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < N; start += batch_size) {
            const std::size_t n = std::min(batch_size, N - start);
            LabeledBatch mini;
            mini.ys = DenseMatrix(n, R);
            mini.labels.resize(n * K);
            mini.users = K;
            for (std::size_t t = 0; t < n; ++t) {
                const std::size_t src = order[start + t];
                std::copy(data.ys.row(src), data.ys.row(src) + R, mini.ys.row(t));
                for (std::size_t k = 0; k < K; ++k)
                    mini.labels[t * K + k] = data.labels[src * K + k];
            }
            epoch_loss += trainer.train_batch(net, mini);
            ++n_batches;
        }
        trace.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return trace;
}

LabeledBatch sample_labeled_batch(const ChannelModel& model, const Constellation& cons,
                                  std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("sample_labeled_batch: empty batch");
    const std::size_t K = model.users();
    LabeledBatch batch;
    batch.ys = DenseMatrix(n, model.receivers());
    batch.labels.resize(n * K);
    batch.users = K;
    std::vector<double> s(K);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t idx = rng.uniform_int(cons.size());
            batch.labels[t * K + k] = static_cast<int>(idx);
            s[k] = cons.symbols[idx];
        }
        const std::vector<double> y = transmit(model, s, rng);
        std::copy(y.begin(), y.end(), batch.ys.row(t));
    }
    return batch;
}

void save_deepsic(const std::filesystem::path& path, const DeepSicNet& net) {
    net.validate();
    nlohmann::json kernels = nlohmann::json::array();
    for (const auto& row : net.kernels) {
        nlohmann::json jrow = nlohmann::json::array();
        for (const NetworkParams& kernel : row) jrow.push_back(network_to_json(kernel));
        kernels.push_back(std::move(jrow));
    }
    save_checkpoint(path, nlohmann::json{{"type", "deepsic"},
                                         {"Q", net.layers_q},
                                         {"K", net.users},
                                         {"constellation", net.constellation.symbols},
                                         {"kernels", std::move(kernels)}});
}

DeepSicNet load_deepsic(const std::filesystem::path& path) {
    const nlohmann::json j = load_checkpoint(path);
    if (j.at("type").get<std::string>() != "deepsic")
        throw std::runtime_error("checkpoint is not a detector snapshot: " + path.string());
    DeepSicNet net;
    net.layers_q = j.at("Q").get<std::size_t>();
    net.users = j.at("K").get<std::size_t>();
    net.constellation.symbols = j.at("constellation").get<std::vector<double>>();
    for (const auto& jrow : j.at("kernels")) {
        std::vector<NetworkParams> row;
        for (const auto& jk : jrow) row.push_back(network_from_json(jk));
        net.kernels.push_back(std::move(row));
    }
    net.validate();
    return net;
}

}  // namespace gansic
