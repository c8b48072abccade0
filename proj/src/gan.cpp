#include "gansic/gan.hpp"

#include <algorithm>
#include <stdexcept>

#include "gansic/checkpoint.hpp"
#include "gansic/deepsic.hpp"
#include "gansic/losses.hpp"

namespace gansic {

void PilotBlock::validate() const {
    if (pilot_tx.rows == 0 || pilot_tx.rows != pilot_rx.rows)
        throw std::invalid_argument("pilot block is empty or inconsistent");
    if (p.size() != pilot_rx.rows * pilot_rx.cols)
        throw std::invalid_argument("pilot flattening does not match received block");
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] != pilot_rx.data[i])
            throw std::invalid_argument("pilot flattening does not match received block");
}

DenseMatrix pilot_pattern(std::size_t len, std::size_t K, const Constellation& cons) {
    cons.validate();
    if (len == 0 || K == 0) throw std::invalid_argument("pilot pattern: empty shape");
    const std::size_t M = cons.size();
    DenseMatrix tx(len, K);
    for (std::size_t t = 0; t < len; ++t) {
        std::uint64_t quotient = t;
        for (std::size_t k = 0; k < K; ++k) {
            tx.at(t, k) = cons.symbols[quotient % M];
            quotient /= M;
        }
    }
    return tx;
}

PilotBlock make_pilot(const ChannelModel& model, const Constellation& cons, std::size_t len,
                      Rng& rng) {
    PilotBlock pilot;
    pilot.pilot_tx = pilot_pattern(len, model.users(), cons);
    pilot.pilot_rx = DenseMatrix(len, model.receivers());
    for (std::size_t t = 0; t < len; ++t) {
        const std::vector<double> y = transmit(model, pilot.pilot_tx.row_span(t), rng);
        std::copy(y.begin(), y.end(), pilot.pilot_rx.row(t));
    }
    pilot.p = pilot.pilot_rx.data;
    return pilot;
}

void GeneratorNet::validate() const {
    params.validate();
    if (params.output_dim() == 0) throw std::invalid_argument("generator: empty output");
    if (params.input_dim() <= pilot_len * receivers() + noise_dim)
        throw std::invalid_argument("generator: input too narrow for pilot and noise slots");
}

void DiscriminatorNet::validate(std::size_t R, std::size_t K) const {
    params.validate();
    if (params.output_dim() != 1)
        throw std::invalid_argument("discriminator: output must be scalar");
    if (params.input_dim() != R + K + pilot_len * R)
        throw std::invalid_argument("discriminator: input width does not match R, K, pilot");
}

GeneratorNet make_generator(std::size_t K, std::size_t R, std::size_t hidden,
                            std::size_t noise_dim, std::size_t pilot_len, Rng& rng) {
    GeneratorNet g;
    g.noise_dim = noise_dim;
    g.pilot_len = pilot_len;
    g.params = make_mlp(pilot_len * R + K + noise_dim,
                        {{hidden, Activation::Tanh, true},
                         {hidden, Activation::Tanh, true},
                         {R, Activation::Identity, false}},
                        rng);
    g.validate();
    return g;
}

DiscriminatorNet make_discriminator(std::size_t K, std::size_t R, std::size_t hidden,
                                    std::size_t pilot_len, Rng& rng) {
    DiscriminatorNet d;
    d.pilot_len = pilot_len;
    d.params = make_mlp(R + K + pilot_len * R,
                        {{hidden, Activation::Tanh, true},
                         {hidden, Activation::Tanh, true},
                         {1, Activation::Sigmoid, false}},
                        rng);
    d.validate(R, K);
    return d;
}

DenseMatrix generator_input(const GeneratorNet& g, const PilotBlock& pilot,
                            const DenseMatrix& s_bars, const DenseMatrix& noise) {
    pilot.validate();
    const std::size_t m = s_bars.rows;
    if (noise.rows != m || noise.cols != g.noise_dim)
        throw std::invalid_argument("generator input: noise shape mismatch");
    if (pilot.p.size() != g.pilot_len * g.receivers() || s_bars.cols != g.users())
        throw std::invalid_argument("generator input: conditioning shape mismatch");
    DenseMatrix x(m, g.params.input_dim());
    for (std::size_t n = 0; n < m; ++n) {
        double* row = x.row(n);
        std::copy(pilot.p.begin(), pilot.p.end(), row);
        std::copy(s_bars.row(n), s_bars.row(n) + s_bars.cols, row + pilot.p.size());
        std::copy(noise.row(n), noise.row(n) + noise.cols,
                  row + pilot.p.size() + s_bars.cols);
    }
    return x;
}

DenseMatrix discriminator_input(const PilotBlock& pilot, const DenseMatrix& ys,
                                const DenseMatrix& s_bars) {
    pilot.validate();
    if (ys.rows != s_bars.rows) throw std::invalid_argument("discriminator input: batch mismatch");
    DenseMatrix x(ys.rows, ys.cols + s_bars.cols + pilot.p.size());
    for (std::size_t n = 0; n < ys.rows; ++n) {
        double* row = x.row(n);
        std::copy(ys.row(n), ys.row(n) + ys.cols, row);
        std::copy(s_bars.row(n), s_bars.row(n) + s_bars.cols, row + ys.cols);
        std::copy(pilot.p.begin(), pilot.p.end(), row + ys.cols + s_bars.cols);
    }
    return x;
}

DenseMatrix generate_batch(const GeneratorNet& g, const PilotBlock& pilot,
                           const DenseMatrix& s_bars, const DenseMatrix& noise, Mode mode,
                           ForwardCache* cache) {
    g.validate();
    const DenseMatrix x = generator_input(g, pilot, s_bars, noise);
    return mlp_forward(g.params, x, mode, cache);
}

DenseMatrix generate_batch(const GeneratorNet& g, const PilotBlock& pilot,
                           const DenseMatrix& s_bars, Rng& rng, Mode mode, ForwardCache* cache) {
    DenseMatrix noise(s_bars.rows, g.noise_dim);
    for (double& v : noise.data) v = rng.normal();
    return generate_batch(g, pilot, s_bars, noise, mode, cache);
}

std::vector<double> generate(const GeneratorNet& g, const PilotBlock& pilot,
                             std::span<const double> s_bar, Rng& rng, Mode mode) {
    DenseMatrix s(1, s_bar.size());
    std::copy(s_bar.begin(), s_bar.end(), s.data.begin());
    return generate_batch(g, pilot, s, rng, mode).data;
}

DiscriminatorLoss discriminator_loss(const DiscriminatorNet& d, const DenseMatrix& real_in,
                                     const DenseMatrix& fake_in, Mode mode, ForwardCache* cache) {
    if (real_in.rows == 0 || fake_in.rows == 0)
        throw std::invalid_argument("discriminator_loss: empty batch");
    if (real_in.cols != fake_in.cols)
        throw std::invalid_argument("discriminator_loss: batch widths differ");
    const std::size_t mr = real_in.rows;
    const std::size_t mf = fake_in.rows;

    // One pooled forward: real rows first, then fake rows.
    DenseMatrix joint(mr + mf, real_in.cols);
    std::copy(real_in.data.begin(), real_in.data.end(), joint.data.begin());
    std::copy(fake_in.data.begin(), fake_in.data.end(), joint.data.begin() + real_in.data.size());

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const DenseMatrix d_out = mlp_forward(d.params, joint, mode, &c);

    DiscriminatorLoss out;
    const double inv_r = 1.0 / static_cast<double>(mr);
    const double inv_f = 1.0 / static_cast<double>(mf);
    DenseMatrix grad(mr + mf, 1);
    for (std::size_t n = 0; n < mr; ++n) {
        const double v = d_out.at(n, 0);
        out.f_d += inv_r * safe_log(v);
        grad.at(n, 0) = inv_r * dlog_dp(v);
        if (v > 0.5) out.real_accuracy += inv_r;
    }
    for (std::size_t n = 0; n < mf; ++n) {
        const double v = d_out.at(mr + n, 0);
        out.f_d += inv_f * safe_log1m(v);
        grad.at(mr + n, 0) = inv_f * dlog1m_dp(v);
        if (v < 0.5) out.fake_accuracy += inv_f;
    }

    out.grads = mlp_backward(d.params, c, grad);
    return out;
}

GeneratorLoss generator_loss(const GeneratorNet& g, const DiscriminatorNet& d,
                             const PilotBlock& pilot, const DenseMatrix& s_bars,
                             const ForwardCache& g_cache, const DenseMatrix& fake_ys,
                             bool non_saturating) {
    if (!g_cache.valid || g_cache.input.rows != fake_ys.rows ||
        g_cache.input.cols != g.params.input_dim() ||
        g_cache.layers.back().post_act.data != fake_ys.data)
        throw std::invalid_argument("generator_loss: stale generation cache");

    const DenseMatrix fake_in = discriminator_input(pilot, fake_ys, s_bars);
    ForwardCache d_cache;
    const DenseMatrix d_out = mlp_forward(d.params, fake_in, Mode::Eval, &d_cache);

    GeneratorLoss out;
    const std::size_t m = d_out.rows;
    const double inv_m = 1.0 / static_cast<double>(m);
    DenseMatrix dLdd(m, 1);
    for (std::size_t n = 0; n < m; ++n) {
        const double v = d_out.at(n, 0);
        out.f_g += inv_m * safe_log1m(v);
        dLdd.at(n, 0) = non_saturating ? -inv_m * dlog_dp(v) : inv_m * dlog1m_dp(v);
    }

    DenseMatrix d_input_grad;
    mlp_backward(d.params, d_cache, dLdd, &d_input_grad, nullptr, /*param_grads=*/false);

    // Only the synthetic-signal slice of D's input leads back into G.
    DenseMatrix dLdY(m, fake_ys.cols);
    for (std::size_t n = 0; n < m; ++n)
        std::copy(d_input_grad.row(n), d_input_grad.row(n) + fake_ys.cols, dLdY.row(n));

    out.grads = mlp_backward(g.params, g_cache, dLdY);
    return out;
}

GanTrainer::GanTrainer(const GeneratorNet& g, const DiscriminatorNet& d, GanConfig cfg)
    : config(cfg),
      adam_g(trainable_count(g.params), cfg.adam),
      adam_d(trainable_count(d.params), cfg.adam) {
    if (cfg.batch == 0) throw std::invalid_argument("gan trainer: empty batch size");
}

namespace {

DenseMatrix draw_symbol_rows(const Constellation& cons, std::size_t m, std::size_t K, Rng& rng) {
    DenseMatrix s(m, K);
    for (double& v : s.data) v = cons.symbols[rng.uniform_int(cons.size())];
    return s;
}

DenseMatrix labels_to_symbols(const LabeledBatch& batch, const Constellation& cons) {
    DenseMatrix s(batch.size(), batch.users);
    for (std::size_t n = 0; n < batch.size(); ++n)
        for (std::size_t k = 0; k < batch.users; ++k)
            s.at(n, k) = cons.symbols[static_cast<std::size_t>(batch.labels[n * batch.users + k])];
    return s;
}

}  // namespace

GanStepResult gan_train_step(GeneratorNet& g, DiscriminatorNet& d, GanTrainer& trainer,
                             const ChannelModel& channel, const Constellation& cons,
                             const PilotBlock& pilot, Rng& rng) {
    g.validate();
    d.validate(g.receivers(), g.users());
    const std::size_t m = trainer.config.batch;

    // Discriminator ascent: real pairs from the channel, fakes from G.
    const LabeledBatch real = sample_labeled_batch(channel, cons, m, rng);
    const DenseMatrix real_ss = labels_to_symbols(real, cons);
    const DenseMatrix fake_ss = draw_symbol_rows(cons, m, g.users(), rng);
    ForwardCache gen_cache;
    const DenseMatrix fake_ys = generate_batch(g, pilot, fake_ss, rng, Mode::Train, &gen_cache);
    commit_batchnorm_stats(g.params, gen_cache);

    const DenseMatrix real_in = discriminator_input(pilot, real.ys, real_ss);
    const DenseMatrix fake_in = discriminator_input(pilot, fake_ys, fake_ss);
    ForwardCache d_cache;
    const DiscriminatorLoss dl = discriminator_loss(d, real_in, fake_in, Mode::Train, &d_cache);
    {
        std::vector<double*> slots = trainable_slots(d.params);
        adam_step(trainer.adam_d, slots, flatten_gradients(dl.grads), /*ascend=*/true);
    }
    commit_batchnorm_stats(d.params, d_cache);

    // Generator descent on a fresh fake batch; D is read-only here.
    const DenseMatrix g_ss = draw_symbol_rows(cons, m, g.users(), rng);
    ForwardCache g_cache;
    const DenseMatrix g_ys = generate_batch(g, pilot, g_ss, rng, Mode::Train, &g_cache);
    commit_batchnorm_stats(g.params, g_cache);
    const GeneratorLoss gl =
        generator_loss(g, d, pilot, g_ss, g_cache, g_ys, trainer.config.non_saturating);
    {
        std::vector<double*> slots = trainable_slots(g.params);
        adam_step(trainer.adam_g, slots, flatten_gradients(gl.grads), /*ascend=*/false);
    }

    trainer.steps += 1;
    trainer.generation_calls += 2;
    return {dl.f_d, gl.f_g, dl.real_accuracy, dl.fake_accuracy};
}

void save_generator(const std::filesystem::path& path, const GeneratorNet& g) {
    g.validate();
    save_checkpoint(path, nlohmann::json{{"role", "generator"},
                                         {"noise_dim", g.noise_dim},
                                         {"pilot_len", g.pilot_len},
                                         {"params", network_to_json(g.params)}});
}

GeneratorNet load_generator(const std::filesystem::path& path) {
    const nlohmann::json j = load_checkpoint(path);
    if (j.at("role").get<std::string>() != "generator")
        throw std::runtime_error("checkpoint is not a generator: " + path.string());
    GeneratorNet g;
    g.noise_dim = j.at("noise_dim").get<std::size_t>();
    g.pilot_len = j.at("pilot_len").get<std::size_t>();
    g.params = network_from_json(j.at("params"));
    g.validate();
    return g;
}

void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& d,
                        std::size_t R, std::size_t K) {
    d.validate(R, K);
    save_checkpoint(path, nlohmann::json{{"role", "discriminator"},
                                         {"pilot_len", d.pilot_len},
                                         {"receivers", R},
                                         {"users", K},
                                         {"params", network_to_json(d.params)}});
}

DiscriminatorNet load_discriminator(const std::filesystem::path& path) {
    const nlohmann::json j = load_checkpoint(path);
    if (j.at("role").get<std::string>() != "discriminator")
        throw std::runtime_error("checkpoint is not a discriminator: " + path.string());
    DiscriminatorNet d;
    d.pilot_len = j.at("pilot_len").get<std::size_t>();
    d.params = network_from_json(j.at("params"));
    d.validate(j.at("receivers").get<std::size_t>(), j.at("users").get<std::size_t>());
    return d;
}

}  // namespace gansic
