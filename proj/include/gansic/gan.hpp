#pragma once

#include <filesystem>

#include "gansic/adam.hpp"
#include "gansic/channel.hpp"
#include "gansic/nn.hpp"
#include "gansic/rng.hpp"

namespace gansic {

// A block of known transmissions and their received signals; the flattened
// received block `p` conditions both networks and is refreshed whenever the
// channel state changes.
struct PilotBlock {
    DenseMatrix pilot_tx;   // len x K
    DenseMatrix pilot_rx;   // len x R
    std::vector<double> p;  // row-major flattening of pilot_rx

    std::size_t length() const { return pilot_tx.rows; }
    void validate() const;
};

// The deterministic pilot symbol pattern both ends agree on: transmission t
// sends constellation index (t / |S|^k) mod |S| on user k, i.e. base-|S|
// counting across users.
DenseMatrix pilot_pattern(std::size_t len, std::size_t K, const Constellation& cons);

PilotBlock make_pilot(const ChannelModel& model, const Constellation& cons, std::size_t len,
                      Rng& rng);

// Generator G(p, s_bar, r) -> synthetic received signal. Two batch-normalized
// tanh hidden layers, identity head so any real-valued output is reachable.
struct GeneratorNet {
    NetworkParams params;
    std::size_t noise_dim = 4;
    std::size_t pilot_len = 10;

    std::size_t receivers() const { return params.output_dim(); }
    std::size_t users() const {
        return params.input_dim() - pilot_len * receivers() - noise_dim;
    }
    void validate() const;
};

// Discriminator D(y, s_bar, p) -> probability the signal came from the real
// channel. Two batch-normalized tanh hidden layers, scalar sigmoid head.
struct DiscriminatorNet {
    NetworkParams params;
    std::size_t pilot_len = 10;

    void validate(std::size_t R, std::size_t K) const;
};

GeneratorNet make_generator(std::size_t K, std::size_t R, std::size_t hidden,
                            std::size_t noise_dim, std::size_t pilot_len, Rng& rng);
DiscriminatorNet make_discriminator(std::size_t K, std::size_t R, std::size_t hidden,
                                    std::size_t pilot_len, Rng& rng);

// Input assembly in the fixed concatenation orders: generator rows are
// [p | s_bar | r], discriminator rows are [y | s_bar | p].
DenseMatrix generator_input(const GeneratorNet& g, const PilotBlock& pilot,
                            const DenseMatrix& s_bars, const DenseMatrix& noise);
DenseMatrix discriminator_input(const PilotBlock& pilot, const DenseMatrix& ys,
                                const DenseMatrix& s_bars);

// Batched generation. The rng overload draws each row's noise vector in row
// order; the explicit-noise overload exists for tests and gradient checks.
DenseMatrix generate_batch(const GeneratorNet& g, const PilotBlock& pilot,
                           const DenseMatrix& s_bars, const DenseMatrix& noise, Mode mode,
                           ForwardCache* cache = nullptr);
DenseMatrix generate_batch(const GeneratorNet& g, const PilotBlock& pilot,
                           const DenseMatrix& s_bars, Rng& rng, Mode mode,
                           ForwardCache* cache = nullptr);
std::vector<double> generate(const GeneratorNet& g, const PilotBlock& pilot,
                             std::span<const double> s_bar, Rng& rng, Mode mode);

// f_D = mean(ln D(real)) + mean(ln(1 - D(fake))), logs clamped. The gradient
// is d f_D / d D-parameters, to be ASCENDED; nothing flows into G here.
// Real and fake rows share one forward pass, so train-mode batch norm sees
// the pooled statistics; normalizing each side by its own moments would erase
// exactly the mean/scale mismatches the discriminator exists to detect.
struct DiscriminatorLoss {
    double f_d = 0.0;
    Gradients grads;
    double real_accuracy = 0.0;  // fraction of real inputs with D > 0.5
    double fake_accuracy = 0.0;  // fraction of fake inputs with D < 0.5
};

DiscriminatorLoss discriminator_loss(const DiscriminatorNet& d, const DenseMatrix& real_in,
                                     const DenseMatrix& fake_in, Mode mode,
                                     ForwardCache* cache = nullptr);

// f_G = mean(ln(1 - D(fake))), the quantity the generator descends. With
// non_saturating the descended target is -mean(ln D(fake)) instead, but the
// reported f_G stays the defining value. Gradients flow through D into G; D
// itself is never touched. D runs with its running statistics here: a
// train-mode forward over the all-fake batch would renormalize it per batch
// and project the shared offset out of the gradient, hiding from G the very
// moment errors it has to fix.
struct GeneratorLoss {
    double f_g = 0.0;
    Gradients grads;
};

GeneratorLoss generator_loss(const GeneratorNet& g, const DiscriminatorNet& d,
                             const PilotBlock& pilot, const DenseMatrix& s_bars,
                             const ForwardCache& g_cache, const DenseMatrix& fake_ys,
                             bool non_saturating);

struct GanConfig {
    std::size_t batch = 64;  // m
    bool non_saturating = false;
    AdamConfig adam;  // alpha 1e-4, beta1 0.5 per the experimental setup
};

struct GanStepResult {
    double f_d = 0.0;
    double f_g = 0.0;
    double d_real_accuracy = 0.0;
    double d_fake_accuracy = 0.0;
};

// Adam state plus the bookkeeping shared by the plain and fused step paths.
struct GanTrainer {
    GanConfig config;
    AdamState adam_g;
    AdamState adam_d;
    std::uint64_t steps = 0;
    std::uint64_t generation_calls = 0;  // batched generator forward passes

    GanTrainer() = default;
    GanTrainer(const GeneratorNet& g, const DiscriminatorNet& d, GanConfig cfg);
};

// One TrainGAN body: sample m real (S, Y) pairs; generate m fakes and ascend
// D on f_D; generate m fresh fakes and descend G on f_G. Batch-norm running
// statistics commit on each network's own training forwards only, so the
// D-ascent leaves G bitwise unchanged and the G-descent leaves D bitwise
// unchanged.
GanStepResult gan_train_step(GeneratorNet& g, DiscriminatorNet& d, GanTrainer& trainer,
                             const ChannelModel& channel, const Constellation& cons,
                             const PilotBlock& pilot, Rng& rng);

void save_generator(const std::filesystem::path& path, const GeneratorNet& g);
GeneratorNet load_generator(const std::filesystem::path& path);
void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& d,
                        std::size_t R, std::size_t K);
DiscriminatorNet load_discriminator(const std::filesystem::path& path);

}  // namespace gansic
