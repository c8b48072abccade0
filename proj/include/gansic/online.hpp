#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gansic/deepsic.hpp"
#include "gansic/gan.hpp"

namespace gansic {

// Shared state of the online loop: the adversarial pair, the detector, and
// the published generator snapshot the detector trains against. The two
// procedures are logically concurrent; they share the generator only through
// publish_snapshot (copy-on-publish), so a detector update always reads a
// complete, versioned parameter set.
struct OnlineState {
    GeneratorNet g;
    DiscriminatorNet d;
    DeepSicNet detector;
    GanTrainer gan;
    DeepSicTrainer det_trainer;

    GeneratorNet snapshot;
    std::uint64_t snapshot_version = 0;  // bumped by every publish after the first
    std::uint64_t snapshot_checksum = 0;
    bool stop = false;

    OnlineState() = default;
    OnlineState(GeneratorNet g_in, DiscriminatorNet d_in, DeepSicNet detector_in,
                const GanConfig& gan_cfg, AdamConfig detector_adam = {},
                LossLayers detector_loss = LossLayers::All);

    // Copies the live generator into the snapshot slot and records its
    // checksum. The constructor publishes version 0; later publishes bump.
    void publish_snapshot();
};

// One TrainGAN step on the live pair followed by a snapshot publish, so
// completed TrainGAN steps and published versions stay in lockstep.
GanStepResult online_train_gan_step(OnlineState& state, const ChannelModel& channel,
                                    const Constellation& cons, const PilotBlock& pilot, Rng& rng);

struct DetectorStepResult {
    double loss = 0.0;
    std::uint64_t snapshot_version = 0;   // which publish this step trained against
    std::uint64_t snapshot_checksum = 0;  // checksum of the generator it read
};

// One UpdateDetector step: draw n uniform symbol vectors, synthesize their
// received signals from the published snapshot (eval mode), and take one
// detector gradient step on that labeled batch.
DetectorStepResult update_detector_step(OnlineState& state, const PilotBlock& pilot, std::size_t n,
                                        Rng& rng);

struct JointStepConfig {
    double lambda_det = 1.0;           // weight of f_Q inside the combined cost
    bool detector_grad_into_G = false; // route d f_Q / d G into the generator update
};

struct JointStepResult {
    double f_d = 0.0;
    double f_g = 0.0;
    double f_q = 0.0;
    double total = 0.0;  // f_D + lambda_det * f_Q
    double d_real_accuracy = 0.0;
    double d_fake_accuracy = 0.0;
};

// The fused step: D ascends as in gan_train_step, then one fresh fake batch
// serves double duty — G descends f_G on it and the detector descends its
// cross-entropy over the same (synthetic signal, symbol) pairs, saving one
// generation pass per step. With lambda_det = 0 and a zero detector learning
// rate this reproduces gan_train_step's parameter trajectory bitwise.
JointStepResult joint_train_step(OnlineState& state, const ChannelModel& channel,
                                 const Constellation& cons, const PilotBlock& pilot,
                                 const JointStepConfig& cfg, Rng& rng);

enum class OnlineMode { Initial, Joint };

struct OnlineLoopConfig {
    std::vector<double> snr_schedule_db = {8.0};  // one block per entry
    std::size_t train_gan_budget = 2000;          // per block; joint steps in Joint mode
    std::size_t update_detector_budget = 2000;    // per block; Initial mode only
    std::size_t detector_batch = 64;              // n
    std::size_t pilot_len = 10;
    OnlineMode mode = OnlineMode::Initial;
    JointStepConfig joint;
    std::size_t probe_interval = 0;    // probe every k-th detector/joint step; 0 = off
    std::size_t probe_symbols = 10000; // per probe, on an independent stream
    std::uint64_t max_stream_vectors = 0;  // cap on real vectors drawn; 0 = unbounded
};

struct OnlineTraceRow {
    std::uint64_t step = 0;  // global, starting at 1
    std::string procedure;   // "train_gan" | "update_detector" | "joint"
    double f_d = 0.0;
    double f_g = 0.0;
    double f_q = 0.0;        // NaN for rows without a detector loss
    double probe_ser = 0.0;  // NaN when this row carries no probe
    std::uint64_t snapshot_version = 0;
};

struct OnlineRunResult {
    std::vector<OnlineTraceRow> trace;
    bool stream_exhausted = false;      // real-sample budget ran out before the step budget
    std::uint64_t vectors_consumed = 0; // real vectors drawn from the channel
};

// Runs the schedule block by block: each block fixes the SNR, refreshes the
// pilot, and strictly alternates TrainGAN and UpdateDetector (or runs fused
// joint steps) until the per-block budgets are spent, the stop flag is set,
// or the real-sample budget is exhausted.
OnlineRunResult online_loop(OnlineState& state, ChannelKind kind, const DenseMatrix& H,
                            const Constellation& cons, const OnlineLoopConfig& cfg, Rng& rng);

}  // namespace gansic
