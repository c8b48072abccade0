#include "gansic/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "gansic/deepsic.hpp"
#include "gansic/gan.hpp"
#include "gansic/nn.hpp"
#include "gansic/rng.hpp"

namespace gansic {

namespace {

constexpr double kStep = 1e-5;

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

// Compares `analytic` to central differences of `loss` over the given slots.
void check_slots(const std::vector<double*>& slots, const std::vector<double>& analytic,
                 const std::function<double()>& loss, GradCheckReport& report) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double keep = *slots[i];
        *slots[i] = keep + kStep;
        const double up = loss();
        *slots[i] = keep - kStep;
        const double down = loss();
        *slots[i] = keep;
        const double numeric = (up - down) / (2.0 * kStep);
        report.max_rel_err = std::max(report.max_rel_err, rel_err(analytic[i], numeric));
        report.checked += 1;
    }
}

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

GradCheckReport check_mlp(Rng rng) {
    GradCheckReport report{"mlp", 0.0, 0};
    NetworkParams net = make_mlp(5,
                                 {{6, Activation::Tanh, true},
                                  {4, Activation::Sigmoid, false},
                                  {3, Activation::Softmax, false}},
                                 rng);
    const DenseMatrix input = random_matrix(7, 5, rng);
    const DenseMatrix weights = random_matrix(7, 3, rng);

    // Weighted-sum readout keeps the loss scalar while exercising every
    // output; its gradient with respect to the outputs is the weight matrix.
    const auto loss = [&] {
        const DenseMatrix out = mlp_forward(net, input, Mode::Train, nullptr);
        double sum = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) sum += out.data[i] * weights.data[i];
        return sum;
    };
    ForwardCache cache;
    mlp_forward(net, input, Mode::Train, &cache);
    Gradients grads = mlp_backward(net, cache, weights);
    check_slots(trainable_slots(net), flatten_gradients(grads), loss, report);
    return report;
}

GradCheckReport check_deepsic(Rng rng) {
    GradCheckReport report{"deepsic", 0.0, 0};
    const Constellation cons = Constellation::bpsk();
    DeepSicNet net = make_deepsic(2, 2, 2, cons, 5, rng);
    LabeledBatch batch;
    batch.users = 2;
    batch.ys = random_matrix(4, 2, rng);
    for (std::size_t i = 0; i < 8; ++i)
        batch.labels.push_back(static_cast<int>(rng.uniform_int(2)));

    DeepSicGrads grads;
    deepsic_loss_and_grads(net, batch, LossLayers::All, &grads);
    const auto loss = [&] {
        return deepsic_loss_and_grads(net, batch, LossLayers::All, nullptr);
    };
    for (std::size_t q = 0; q < net.layers_q; ++q)
        for (std::size_t k = 0; k < net.users; ++k)
            check_slots(trainable_slots(net.kernels[q][k]),
                        flatten_gradients(grads.kernels[q][k]), loss, report);

    // The received-signal gradient feeds generator training; check it too.
    std::vector<double*> y_slots;
    std::vector<double> y_analytic;
    for (std::size_t i = 0; i < batch.ys.data.size(); ++i) {
        y_slots.push_back(&batch.ys.data[i]);
        y_analytic.push_back(grads.y_grad.data[i]);
    }
    check_slots(y_slots, y_analytic, loss, report);
    return report;
}

struct GanFixture {
    Constellation cons = Constellation::bpsk();
    GeneratorNet g;
    DiscriminatorNet d;
    PilotBlock pilot;
    DenseMatrix s_bars;
    DenseMatrix noise;

    explicit GanFixture(Rng& rng) {
        g = make_generator(2, 2, 4, 2, 2, rng);
        d = make_discriminator(2, 2, 4, 2, rng);
        ChannelModel model;
        model.kind = ChannelKind::LinearGaussian;
        model.H = DenseMatrix::identity(2);
        model.noise_var = 0.1;
        Rng prng = rng.fork("pilot");
        pilot = make_pilot(model, cons, 2, prng);
        s_bars = DenseMatrix(5, 2);
        for (double& v : s_bars.data) v = cons.symbols[rng.uniform_int(2)];
        noise = random_matrix(5, 2, rng);
    }
};

GradCheckReport check_discriminator_loss(Rng rng) {
    GradCheckReport report{"discriminator_loss", 0.0, 0};
    GanFixture fx(rng);
    const DenseMatrix real_in = random_matrix(5, 8, rng, 0.7);
    const DenseMatrix fake_ys = generate_batch(fx.g, fx.pilot, fx.s_bars, fx.noise, Mode::Train);
    const DenseMatrix fake_in = discriminator_input(fx.pilot, fake_ys, fx.s_bars);

    const DiscriminatorLoss dl = discriminator_loss(fx.d, real_in, fake_in, Mode::Train);
    const auto loss = [&] {
        return discriminator_loss(fx.d, real_in, fake_in, Mode::Train).f_d;
    };
    check_slots(trainable_slots(fx.d.params), flatten_gradients(dl.grads), loss, report);
    return report;
}

GradCheckReport check_generator_loss(Rng rng) {
    GradCheckReport report{"generator_loss", 0.0, 0};
    GanFixture fx(rng);
    const auto run = [&] {
        ForwardCache cache;
        const DenseMatrix ys =
            generate_batch(fx.g, fx.pilot, fx.s_bars, fx.noise, Mode::Train, &cache);
        return generator_loss(fx.g, fx.d, fx.pilot, fx.s_bars, cache, ys, false);
    };
    const std::vector<double> analytic = flatten_gradients(run().grads);
    const auto loss = [&] { return run().f_g; };
    check_slots(trainable_slots(fx.g.params), analytic, loss, report);
    return report;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suites(std::uint64_t seed) {
    Rng rng(seed);
    return {check_mlp(rng.fork("mlp")), check_deepsic(rng.fork("deepsic")),
            check_discriminator_loss(rng.fork("d_loss")),
            check_generator_loss(rng.fork("g_loss"))};
}

}  // namespace gansic
