#include "gansic/online.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "gansic/losses.hpp"

namespace gansic {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

OnlineState::OnlineState(GeneratorNet g_in, DiscriminatorNet d_in, DeepSicNet detector_in,
                         const GanConfig& gan_cfg, AdamConfig detector_adam,
                         LossLayers detector_loss)
    : g(std::move(g_in)), d(std::move(d_in)), detector(std::move(detector_in)) {
    g.validate();
    d.validate(g.receivers(), g.users());
    detector.validate();
    if (detector.users != g.users() || detector.receivers() != g.receivers())
        throw std::invalid_argument("online state: detector shape does not match generator");
    gan = GanTrainer(g, d, gan_cfg);
    det_trainer = DeepSicTrainer(detector, detector_adam, detector_loss);
    snapshot = g;
    snapshot_version = 0;
    snapshot_checksum = params_checksum(g.params);
}

void OnlineState::publish_snapshot() {
    snapshot = g;
    snapshot_checksum = params_checksum(g.params);
    ++snapshot_version;
}

GanStepResult online_train_gan_step(OnlineState& state, const ChannelModel& channel,
                                    const Constellation& cons, const PilotBlock& pilot,
                                    Rng& rng) {
    const GanStepResult result =
        gan_train_step(state.g, state.d, state.gan, channel, cons, pilot, rng);
    state.publish_snapshot();
    return result;
}

DetectorStepResult update_detector_step(OnlineState& state, const PilotBlock& pilot,
                                        std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("detector step: empty batch");
    const Constellation& cons = state.detector.constellation;
    const std::size_t K = state.detector.users;

    LabeledBatch batch;
    batch.users = K;
    batch.labels.resize(n * K);
    DenseMatrix s_values(n, K);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(cons.size()));
            batch.labels[i * K + k] = static_cast<int>(idx);
            s_values.at(i, k) = cons.symbols[idx];
        }
    }
    batch.ys = generate_batch(state.snapshot, pilot, s_values, rng, Mode::Eval);
    state.gan.generation_calls += 1;

    DetectorStepResult out;
    out.snapshot_version = state.snapshot_version;
    out.snapshot_checksum = state.snapshot_checksum;
    out.loss = state.det_trainer.train_batch(state.detector, batch);
    return out;
}

JointStepResult joint_train_step(OnlineState& state, const ChannelModel& channel,
                                 const Constellation& cons, const PilotBlock& pilot,
                                 const JointStepConfig& cfg, Rng& rng) {
    if (cfg.lambda_det < 0.0)
        throw std::invalid_argument("joint step: negative detector weight");
    GeneratorNet& g = state.g;
    DiscriminatorNet& d = state.d;
    GanTrainer& trainer = state.gan;
    g.validate();
    d.validate(g.receivers(), g.users());
    const std::size_t m = trainer.config.batch;
    const std::size_t K = g.users();

    // Discriminator ascent, drawing from the rng in exactly the order
    // gan_train_step does so the two trajectories coincide when the fused
    // extras are weighted to zero.
    const LabeledBatch real = sample_labeled_batch(channel, cons, m, rng);
    DenseMatrix real_ss(m, K);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < K; ++k)
            real_ss.at(i, k) = cons.symbols[static_cast<std::size_t>(real.labels[i * K + k])];
    DenseMatrix fake_ss(m, K);
    for (double& v : fake_ss.data) v = cons.symbols[rng.uniform_int(cons.size())];
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

    // One fresh fake batch shared by the generator and the detector.
    LabeledBatch fused;
    fused.users = K;
    fused.labels.resize(m * K);
    DenseMatrix g_ss(m, K);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(cons.size()));
            fused.labels[i * K + k] = static_cast<int>(idx);
            g_ss.at(i, k) = cons.symbols[idx];
        }
    }
    ForwardCache g_cache;
    const DenseMatrix g_ys = generate_batch(g, pilot, g_ss, rng, Mode::Train, &g_cache);
    commit_batchnorm_stats(g.params, g_cache);
    GeneratorLoss gl =
        generator_loss(g, d, pilot, g_ss, g_cache, g_ys, trainer.config.non_saturating);

    fused.ys = g_ys;
    DeepSicGrads qg;
    const double f_q =
        deepsic_loss_and_grads(state.detector, fused, state.det_trainer.loss_layers, &qg);
    if (cfg.detector_grad_into_G && cfg.lambda_det != 0.0) {
        DenseMatrix scaled = qg.y_grad;
        for (double& v : scaled.data) v *= cfg.lambda_det;
        accumulate(gl.grads, mlp_backward(g.params, g_cache, scaled));
    }
    {
        std::vector<double*> slots = trainable_slots(g.params);
        adam_step(trainer.adam_g, slots, flatten_gradients(gl.grads), /*ascend=*/false);
    }
    for (std::size_t q = 0; q < state.detector.layers_q; ++q) {
        for (std::size_t k = 0; k < state.detector.users; ++k) {
            std::vector<double*> slots = trainable_slots(state.detector.kernels[q][k]);
            adam_step(state.det_trainer.states[q][k], slots,
                      flatten_gradients(qg.kernels[q][k]));
        }
    }

    trainer.steps += 1;
    trainer.generation_calls += 2;
    state.publish_snapshot();

    JointStepResult out;
    out.f_d = dl.f_d;
    out.f_g = gl.f_g;
    out.f_q = f_q;
    out.total = dl.f_d + cfg.lambda_det * f_q;
    out.d_real_accuracy = dl.real_accuracy;
    out.d_fake_accuracy = dl.fake_accuracy;
    return out;
}

OnlineRunResult online_loop(OnlineState& state, ChannelKind kind, const DenseMatrix& H,
                            const Constellation& cons, const OnlineLoopConfig& cfg, Rng& rng) {
    if (cfg.snr_schedule_db.empty())
        throw std::invalid_argument("online loop: empty schedule");
    OnlineRunResult out;
    const std::size_t m = state.gan.config.batch;
    const Rng probe_master = rng.fork("probe");
    std::uint64_t global_step = 0;
    std::uint64_t detector_steps = 0;  // update_detector or joint steps completed
    std::uint64_t probes = 0;

    const auto maybe_probe = [&](OnlineTraceRow& row, const ChannelModel& model) {
        if (cfg.probe_interval == 0 || detector_steps % cfg.probe_interval != 0) return;
        Rng prng = probe_master.fork(std::to_string(probes++));
        SerOptions opts;
        opts.max_vectors = std::max<std::size_t>(1, cfg.probe_symbols / state.detector.users);
        opts.min_vectors = opts.max_vectors;
        opts.target_errors = 0;
        const BatchDetector detect = [&](const DenseMatrix& ys) {
            return deepsic_detect(state.detector, ys);
        };
        row.probe_ser = ser_estimate(detect, model, cons, prng, opts).ser;
    };

    for (std::size_t block = 0;
         block < cfg.snr_schedule_db.size() && !state.stop && !out.stream_exhausted; ++block) {
        ChannelModel model;
        model.kind = kind;
        model.H = H;
        model.noise_var = std::pow(10.0, -cfg.snr_schedule_db[block] / 10.0);
        model.validate();
        Rng pilot_rng = rng.fork("pilot/" + std::to_string(block));
        const PilotBlock pilot = make_pilot(model, cons, cfg.pilot_len, pilot_rng);

        const std::size_t gan_budget = cfg.train_gan_budget;
        const std::size_t det_budget =
            cfg.mode == OnlineMode::Initial ? cfg.update_detector_budget : 0;
        for (std::size_t i = 0; i < std::max(gan_budget, det_budget) && !state.stop; ++i) {
            if (i < gan_budget) {
                if (cfg.max_stream_vectors > 0 &&
                    out.vectors_consumed + m > cfg.max_stream_vectors) {
                    out.stream_exhausted = true;
                    break;
                }
                out.vectors_consumed += m;
                if (cfg.mode == OnlineMode::Joint) {
                    const JointStepResult r =
                        joint_train_step(state, model, cons, pilot, cfg.joint, rng);
                    ++detector_steps;
                    OnlineTraceRow row{++global_step, "joint",  r.f_d,
                                       r.f_g,         r.f_q,    kNan,
                                       state.snapshot_version};
                    maybe_probe(row, model);
                    out.trace.push_back(std::move(row));
                } else {
                    const GanStepResult r =
                        online_train_gan_step(state, model, cons, pilot, rng);
                    out.trace.push_back({++global_step, "train_gan", r.f_d, r.f_g, kNan, kNan,
                                         state.snapshot_version});
                }
            }
            if (cfg.mode == OnlineMode::Initial && i < det_budget) {
                const DetectorStepResult r =
                    update_detector_step(state, pilot, cfg.detector_batch, rng);
                ++detector_steps;
                OnlineTraceRow row{++global_step, "update_detector", kNan, kNan,
                                   r.loss,        kNan,              r.snapshot_version};
                maybe_probe(row, model);
                out.trace.push_back(std::move(row));
            }
        }
    }
    return out;
}

}  // namespace gansic
