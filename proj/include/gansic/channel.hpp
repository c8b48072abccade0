#pragma once

#include <span>
#include <string>
#include <vector>

#include "gansic/matrix.hpp"
#include "gansic/rng.hpp"

namespace gansic {

struct Constellation {
    std::vector<double> symbols;

    static Constellation bpsk() { return {{-1.0, +1.0}}; }

    std::size_t size() const { return symbols.size(); }
    std::size_t index_of(double value) const;  // exact match; throws if absent
    void validate() const;
};

enum class ChannelKind { LinearGaussian, QuantizedGaussian, Poisson };

const char* channel_kind_name(ChannelKind kind);
ChannelKind channel_kind_from_name(const std::string& name);

// A fixed channel: R x K gain matrix plus the noise variance on linear scale.
// Immutable after construction; transmit draws all randomness from the rng it
// is handed.
struct ChannelModel {
    ChannelKind kind = ChannelKind::LinearGaussian;
    DenseMatrix H;  // R x K
    double noise_var = 1.0;

    std::size_t receivers() const { return H.rows; }
    std::size_t users() const { return H.cols; }
    void validate() const;
};

// H[i][j] = exp(-|i-j|), the spatial exponential-decay gain profile.
DenseMatrix exp_decay_channel_matrix(std::size_t K, std::size_t R);

// sigma_w^2 = 10^(-snr_db/10) with unit-power symbols through fixed H.
double snr_to_noise_var(double snr_db);

// The two-bit magnitude quantizer: |v| < 2 -> sign(v), otherwise 3*sign(v),
// with sign(0) = +1 and |v| = 2 mapped to the outer cell.
double quantize_level(double v);

// Log probability that a N(mu, sigma^2) draw quantizes to `level`.
double quantized_cell_log_prob(double level, double mu, double sigma);

std::vector<double> transmit(const ChannelModel& model, std::span<const double> s, Rng& rng);

// Exact log-likelihood of observing y given transmitted s. Discrete channels
// validate that y actually lies in their output alphabet.
double log_likelihood(const ChannelModel& model, std::span<const double> y,
                      std::span<const double> s);

}  // namespace gansic
