#include "gansic/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace gansic {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw std::invalid_argument("unknown activation name: " + name);
}

BatchNormState BatchNormState::identity(std::size_t units) {
    BatchNormState bn;
    bn.gamma.assign(units, 1.0);
    bn.beta.assign(units, 0.0);
    bn.running_mean.assign(units, 0.0);
    bn.running_var.assign(units, 1.0);
    return bn;
}

void NetworkParams::validate() const {
    if (layers.empty()) throw std::invalid_argument("network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        if (layer.weight.rows == 0 || layer.weight.cols == 0)
            throw std::invalid_argument("layer with empty weight matrix");
        if (layer.bias.size() != layer.out_dim())
            throw std::invalid_argument("bias size does not match layer width");
        if (layer.batchnorm) {
            const BatchNormState& bn = *layer.batchnorm;
            if (bn.gamma.size() != layer.out_dim() || bn.beta.size() != layer.out_dim() ||
                bn.running_mean.size() != layer.out_dim() || bn.running_var.size() != layer.out_dim())
                throw std::invalid_argument("batchnorm state does not match layer width");
        }
        if (l + 1 < layers.size() && layers[l + 1].in_dim() != layer.out_dim())
            throw std::invalid_argument("layer dimensions do not chain");
    }
}

NetworkParams make_mlp(std::size_t input_dim, const std::vector<LayerSpec>& specs, Rng& rng) {
    if (input_dim == 0 || specs.empty()) throw std::invalid_argument("make_mlp: empty shape");
    NetworkParams net;
    std::size_t fan_in = input_dim;
    for (const LayerSpec& spec : specs) {
        if (spec.units == 0) throw std::invalid_argument("make_mlp: zero-width layer");
        Layer layer;
        layer.weight = DenseMatrix(fan_in, spec.units);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.units));
        for (double& w : layer.weight.data) w = (2.0 * rng.uniform() - 1.0) * limit;
        layer.bias.assign(spec.units, 0.0);
        if (spec.batchnorm) layer.batchnorm = BatchNormState::identity(spec.units);
        layer.activation = spec.activation;
        net.layers.push_back(std::move(layer));
        fan_in = spec.units;
    }
    net.validate();
    return net;
}

namespace {

void apply_activation(Activation act, DenseMatrix& m) {
    switch (act) {
        case Activation::Identity:
            return;
        case Activation::Tanh:
            for (double& v : m.data) v = std::tanh(v);
            return;
        case Activation::Sigmoid:
            for (double& v : m.data) v = 1.0 / (1.0 + std::exp(-v));
            return;
        case Activation::Softmax:
            for (std::size_t r = 0; r < m.rows; ++r) {
                double* row = m.row(r);
                double mx = row[0];
                for (std::size_t c = 1; c < m.cols; ++c) mx = std::max(mx, row[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < m.cols; ++c) {
                    row[c] = std::exp(row[c] - mx);
                    sum += row[c];
                }
                for (std::size_t c = 0; c < m.cols; ++c) row[c] /= sum;
            }
            return;
    }
}

// dL/d(pre-activation) from dL/d(post-activation), using only post values.
void activation_backward(Activation act, const DenseMatrix& post, DenseMatrix& delta) {
    switch (act) {
        case Activation::Identity:
            return;
        case Activation::Tanh:
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                delta.data[i] *= 1.0 - post.data[i] * post.data[i];
            return;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                delta.data[i] *= post.data[i] * (1.0 - post.data[i]);
            return;
        case Activation::Softmax:
            for (std::size_t r = 0; r < delta.rows; ++r) {
                const double* q = post.row(r);
                double* g = delta.row(r);
                double dot = 0.0;
                for (std::size_t c = 0; c < delta.cols; ++c) dot += g[c] * q[c];
                for (std::size_t c = 0; c < delta.cols; ++c) g[c] = q[c] * (g[c] - dot);
            }
            return;
    }
}

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

}  // namespace

DenseMatrix mlp_forward(const NetworkParams& net, const DenseMatrix& input, Mode mode,
                        ForwardCache* cache) {
    net.validate();
    if (input.cols != net.input_dim())
        throw std::invalid_argument("mlp_forward: input width does not match network");
    if (input.rows == 0) throw std::invalid_argument("mlp_forward: empty batch");

    if (cache) {
        cache->mode = mode;
        cache->input = input;
        cache->layers.assign(net.layers.size(), LayerCache{});
        cache->valid = false;
    }

    const std::size_t batch = input.rows;
    DenseMatrix current = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        DenseMatrix z = matmul(current, layer.weight);
        for (std::size_t r = 0; r < batch; ++r) {
            double* row = z.row(r);
            for (std::size_t c = 0; c < z.cols; ++c) row[c] += layer.bias[c];
        }

        if (layer.batchnorm) {
            const BatchNormState& bn = *layer.batchnorm;
            const std::size_t width = z.cols;
            std::vector<double> mean(width, 0.0), var(width, 0.0), inv_std(width, 0.0);
            if (mode == Mode::Train) {
                for (std::size_t r = 0; r < batch; ++r) {
                    const double* row = z.row(r);
                    for (std::size_t c = 0; c < width; ++c) mean[c] += row[c];
                }
                for (std::size_t c = 0; c < width; ++c) mean[c] /= static_cast<double>(batch);
                for (std::size_t r = 0; r < batch; ++r) {
                    const double* row = z.row(r);
                    for (std::size_t c = 0; c < width; ++c) {
                        const double d = row[c] - mean[c];
                        var[c] += d * d;
                    }
                }
                for (std::size_t c = 0; c < width; ++c) var[c] /= static_cast<double>(batch);
            } else {
                mean = bn.running_mean;
                var = bn.running_var;
            }
            for (std::size_t c = 0; c < width; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + kBnEps);

            DenseMatrix xhat(batch, width);
            for (std::size_t r = 0; r < batch; ++r) {
                const double* zin = z.row(r);
                double* xh = xhat.row(r);
                double* out = z.row(r);
                for (std::size_t c = 0; c < width; ++c) {
                    xh[c] = (zin[c] - mean[c]) * inv_std[c];
                    out[c] = bn.gamma[c] * xh[c] + bn.beta[c];
                }
            }
            if (cache) {
                LayerCache& lc = cache->layers[l];
                lc.xhat = std::move(xhat);
                lc.batch_mean = std::move(mean);
                lc.batch_var = std::move(var);
                lc.inv_std = std::move(inv_std);
            }
        }

        apply_activation(layer.activation, z);
        if (cache) cache->layers[l].post_act = z;
        current = std::move(z);
    }
    if (cache) cache->valid = true;
    return current;
}

std::vector<double> mlp_forward(const NetworkParams& net, const std::vector<double>& input,
                                Mode mode) {
    DenseMatrix in(1, input.size());
    in.data = input;
    DenseMatrix out = mlp_forward(net, in, mode, nullptr);
    return out.data;
}

void commit_batchnorm_stats(NetworkParams& net, const ForwardCache& cache) {
    if (!cache.valid || cache.layers.size() != net.layers.size())
        throw std::invalid_argument("commit_batchnorm_stats: cache does not match network");
    if (cache.mode != Mode::Train)
        throw std::invalid_argument("commit_batchnorm_stats: cache was not built in train mode");
    const std::size_t batch = cache.input.rows;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!net.layers[l].batchnorm) continue;
        BatchNormState& bn = *net.layers[l].batchnorm;
        const LayerCache& lc = cache.layers[l];
        if (lc.batch_mean.size() != bn.running_mean.size())
            throw std::invalid_argument("commit_batchnorm_stats: cache does not match network");
        const double unbias =
            batch > 1 ? static_cast<double>(batch) / static_cast<double>(batch - 1) : 1.0;
        for (std::size_t c = 0; c < bn.running_mean.size(); ++c) {
            bn.running_mean[c] = kBnMomentum * bn.running_mean[c] + (1.0 - kBnMomentum) * lc.batch_mean[c];
            bn.running_var[c] =
                kBnMomentum * bn.running_var[c] + (1.0 - kBnMomentum) * lc.batch_var[c] * unbias;
        }
    }
}

Gradients make_zero_gradients(const NetworkParams& net) {
    Gradients g;
    g.layers.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        g.layers[l].weight = DenseMatrix(layer.weight.rows, layer.weight.cols);
        g.layers[l].bias.assign(layer.out_dim(), 0.0);
        if (layer.batchnorm) {
            g.layers[l].gamma.assign(layer.out_dim(), 0.0);
            g.layers[l].beta.assign(layer.out_dim(), 0.0);
        }
    }
    return g;
}

void accumulate(Gradients& dst, const Gradients& src) {
    if (dst.layers.size() != src.layers.size())
        throw std::invalid_argument("accumulate: gradient shapes differ");
    for (std::size_t l = 0; l < dst.layers.size(); ++l) {
        LayerGrads& d = dst.layers[l];
        const LayerGrads& s = src.layers[l];
        if (d.weight.data.size() != s.weight.data.size() || d.bias.size() != s.bias.size() ||
            d.gamma.size() != s.gamma.size())
            throw std::invalid_argument("accumulate: gradient shapes differ");
        for (std::size_t i = 0; i < d.weight.data.size(); ++i) d.weight.data[i] += s.weight.data[i];
        for (std::size_t i = 0; i < d.bias.size(); ++i) d.bias[i] += s.bias[i];
        for (std::size_t i = 0; i < d.gamma.size(); ++i) d.gamma[i] += s.gamma[i];
        for (std::size_t i = 0; i < d.beta.size(); ++i) d.beta[i] += s.beta[i];
    }
}

void scale(Gradients& g, double factor) {
    for (LayerGrads& l : g.layers) {
        for (double& v : l.weight.data) v *= factor;
        for (double& v : l.bias) v *= factor;
        for (double& v : l.gamma) v *= factor;
        for (double& v : l.beta) v *= factor;
    }
}

Gradients mlp_backward(const NetworkParams& net, const ForwardCache& cache,
                       const DenseMatrix& grad_output, DenseMatrix* grad_input,
                       const DenseMatrix* extra_preact_grad, bool param_grads) {
    if (!cache.valid || cache.layers.size() != net.layers.size())
        throw std::invalid_argument("mlp_backward: stale or mismatched cache");
    const std::size_t batch = cache.input.rows;
    if (grad_output.rows != batch || grad_output.cols != net.output_dim())
        throw std::invalid_argument("mlp_backward: grad_output shape mismatch");
    if (extra_preact_grad &&
        (extra_preact_grad->rows != batch || extra_preact_grad->cols != net.output_dim()))
        throw std::invalid_argument("mlp_backward: extra_preact_grad shape mismatch");

    Gradients grads;
    if (param_grads) grads = make_zero_gradients(net);

    DenseMatrix delta = grad_output;  // dL/d(post-activation of current layer)
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& layer = net.layers[li];
        const LayerCache& lc = cache.layers[li];
        if (lc.post_act.rows != batch || lc.post_act.cols != layer.out_dim())
            throw std::invalid_argument("mlp_backward: stale or mismatched cache");

        activation_backward(layer.activation, lc.post_act, delta);
        if (li + 1 == net.layers.size() && extra_preact_grad)
            add_inplace(delta, *extra_preact_grad);

        // delta now holds dL/d(batch-norm output) = dL/d(pre-activation).
        if (layer.batchnorm) {
            const BatchNormState& bn = *layer.batchnorm;
            const std::size_t width = layer.out_dim();
            if (param_grads) {
                LayerGrads& lg = grads.layers[li];
                for (std::size_t r = 0; r < batch; ++r) {
                    const double* dy = delta.row(r);
                    const double* xh = lc.xhat.row(r);
                    for (std::size_t c = 0; c < width; ++c) {
                        lg.gamma[c] += dy[c] * xh[c];
                        lg.beta[c] += dy[c];
                    }
                }
            }
            if (cache.mode == Mode::Train) {
                std::vector<double> sum_dxhat(width, 0.0), sum_dxhat_xhat(width, 0.0);
                for (std::size_t r = 0; r < batch; ++r) {
                    const double* dy = delta.row(r);
                    const double* xh = lc.xhat.row(r);
                    for (std::size_t c = 0; c < width; ++c) {
                        const double dxh = dy[c] * bn.gamma[c];
                        sum_dxhat[c] += dxh;
                        sum_dxhat_xhat[c] += dxh * xh[c];
                    }
                }
                const double inv_b = 1.0 / static_cast<double>(batch);
                for (std::size_t r = 0; r < batch; ++r) {
                    double* dy = delta.row(r);
                    const double* xh = lc.xhat.row(r);
                    for (std::size_t c = 0; c < width; ++c) {
                        const double dxh = dy[c] * bn.gamma[c];
                        dy[c] = lc.inv_std[c] *
                                (dxh - inv_b * sum_dxhat[c] - inv_b * xh[c] * sum_dxhat_xhat[c]);
                    }
                }
            } else {
                for (std::size_t r = 0; r < batch; ++r) {
                    double* dy = delta.row(r);
                    for (std::size_t c = 0; c < width; ++c)
                        dy[c] *= bn.gamma[c] * lc.inv_std[c];
                }
            }
        }

        // delta holds dL/dz for the affine output z = x W + b.
        const DenseMatrix& layer_input = li == 0 ? cache.input : cache.layers[li - 1].post_act;
        if (param_grads) {
            LayerGrads& lg = grads.layers[li];
            lg.weight = matmul_tn(layer_input, delta);
            for (std::size_t r = 0; r < batch; ++r) {
                const double* dz = delta.row(r);
                for (std::size_t c = 0; c < layer.out_dim(); ++c) lg.bias[c] += dz[c];
            }
        }

        const bool need_input_grad = li > 0 || grad_input != nullptr;
        if (need_input_grad) {
            DenseMatrix dx = matmul_nt(delta, layer.weight);
            if (li == 0 && grad_input) *grad_input = std::move(dx);
            else delta = std::move(dx);
        }
    }
    return grads;
}

std::size_t trainable_count(const NetworkParams& net) {
    std::size_t n = 0;
    for (const Layer& layer : net.layers) {
        n += layer.weight.data.size() + layer.bias.size();
        if (layer.batchnorm) n += 2 * layer.out_dim();
    }
    return n;
}

std::vector<double*> trainable_slots(NetworkParams& net) {
    std::vector<double*> slots;
    slots.reserve(trainable_count(net));
    for (Layer& layer : net.layers) {
        for (double& v : layer.weight.data) slots.push_back(&v);
        for (double& v : layer.bias) slots.push_back(&v);
        if (layer.batchnorm) {
            for (double& v : layer.batchnorm->gamma) slots.push_back(&v);
            for (double& v : layer.batchnorm->beta) slots.push_back(&v);
        }
    }
    return slots;
}

std::vector<double> flatten_gradients(const Gradients& g) {
    std::vector<double> flat;
    for (const LayerGrads& l : g.layers) {
        flat.insert(flat.end(), l.weight.data.begin(), l.weight.data.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
        flat.insert(flat.end(), l.gamma.begin(), l.gamma.end());
        flat.insert(flat.end(), l.beta.begin(), l.beta.end());
    }
    return flat;
}

std::uint64_t params_checksum(const NetworkParams& net) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const double* p, std::size_t n) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    for (const Layer& layer : net.layers) {
        mix(layer.weight.data.data(), layer.weight.data.size());
        mix(layer.bias.data(), layer.bias.size());
        if (layer.batchnorm) {
            const BatchNormState& bn = *layer.batchnorm;
            mix(bn.gamma.data(), bn.gamma.size());
            mix(bn.beta.data(), bn.beta.size());
            mix(bn.running_mean.data(), bn.running_mean.size());
            mix(bn.running_var.data(), bn.running_var.size());
        }
    }
    return h;
}

}  // namespace gansic
