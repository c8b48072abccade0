#include "gansic/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace gansic {

std::size_t Constellation::index_of(double value) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
        if (symbols[i] == value) return i;
    throw std::invalid_argument("value is not a constellation point");
}

void Constellation::validate() const {
    if (symbols.empty()) throw std::invalid_argument("constellation is empty");
    for (std::size_t i = 0; i < symbols.size(); ++i)
        for (std::size_t j = i + 1; j < symbols.size(); ++j)
            if (symbols[i] == symbols[j])
                throw std::invalid_argument("constellation has duplicate points");
}

const char* channel_kind_name(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::LinearGaussian: return "linear";
        case ChannelKind::QuantizedGaussian: return "quantized";
        case ChannelKind::Poisson: return "poisson";
    }
    throw std::logic_error("unknown channel kind");
}

ChannelKind channel_kind_from_name(const std::string& name) {
    if (name == "linear") return ChannelKind::LinearGaussian;
    if (name == "quantized") return ChannelKind::QuantizedGaussian;
    if (name == "poisson") return ChannelKind::Poisson;
    throw std::invalid_argument("unknown channel kind: " + name);
}

void ChannelModel::validate() const {
    if (H.rows == 0 || H.cols == 0) throw std::invalid_argument("channel matrix is empty");
    for (double v : H.data)
        if (!std::isfinite(v)) throw std::invalid_argument("channel matrix has non-finite entry");
    if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
}

DenseMatrix exp_decay_channel_matrix(std::size_t K, std::size_t R) {
    if (K == 0 || R == 0) throw std::invalid_argument("channel dimensions must be positive");
    DenseMatrix H(R, K);
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < K; ++j)
            H.at(i, j) = std::exp(-std::fabs(static_cast<double>(i) - static_cast<double>(j)));
    return H;
}

double snr_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double quantize_level(double v) {
    const double sign = v < 0.0 ? -1.0 : 1.0;  // sign(0) = +1
    return std::fabs(v) < 2.0 ? sign : 3.0 * sign;
}

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(a < N(mu, sigma^2) <= b) evaluated through erfc on the side that avoids
// cancellation in the tails.
double gaussian_interval_prob(double a, double b, double mu, double sigma) {
    const double inv = 1.0 / (sigma * std::sqrt(2.0));
    const double za = (a - mu) * inv;
    const double zb = (b - mu) * inv;
    if (za + zb > 0.0) return 0.5 * (std::erfc(za) - std::erfc(zb));
    return 0.5 * (std::erfc(-zb) - std::erfc(-za));
}

std::vector<double> mean_signal(const ChannelModel& model, std::span<const double> s) {
    if (s.size() != model.users())
        throw std::invalid_argument("symbol vector length does not match channel");
    std::vector<double> mu(model.receivers(), 0.0);
    matvec(model.H, s, mu);
    return mu;
}

constexpr double kPoissonRateFloor = 1e-6;

double poisson_rate(double mean_i, double noise_var) {
    const double lambda = mean_i / std::sqrt(noise_var) + 1.0;
    return lambda > kPoissonRateFloor ? lambda : kPoissonRateFloor;
}

}  // namespace

double quantized_cell_log_prob(double level, double mu, double sigma) {
    double p;
    if (level == -3.0) p = std_normal_cdf((-2.0 - mu) / sigma);
    else if (level == -1.0) p = gaussian_interval_prob(-2.0, 0.0, mu, sigma);
    else if (level == 1.0) p = gaussian_interval_prob(0.0, 2.0, mu, sigma);
    else if (level == 3.0) p = 1.0 - std_normal_cdf((2.0 - mu) / sigma);
    else throw std::invalid_argument("quantized output level not in {-3,-1,+1,+3}");
    return std::log(p);
}

std::vector<double> transmit(const ChannelModel& model, std::span<const double> s, Rng& rng) {
    model.validate();
    std::vector<double> mu = mean_signal(model, s);
    const double sigma = std::sqrt(model.noise_var);
    std::vector<double> y(model.receivers());
    switch (model.kind) {
        case ChannelKind::LinearGaussian:
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = mu[i] + sigma * rng.normal();
            break;
        case ChannelKind::QuantizedGaussian:
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] = quantize_level(mu[i] + sigma * rng.normal());
            break;
        case ChannelKind::Poisson:
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] = static_cast<double>(rng.poisson(poisson_rate(mu[i], model.noise_var)));
            break;
    }
    return y;
}

double log_likelihood(const ChannelModel& model, std::span<const double> y,
                      std::span<const double> s) {
    model.validate();
    if (y.size() != model.receivers())
        throw std::invalid_argument("received vector length does not match channel");
    const std::vector<double> mu = mean_signal(model, s);
    double ll = 0.0;
    switch (model.kind) {
        case ChannelKind::LinearGaussian: {
            const double var = model.noise_var;
            const double log_norm = -0.5 * std::log(2.0 * M_PI * var);
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double d = y[i] - mu[i];
                ll += log_norm - d * d / (2.0 * var);
            }
            break;
        }
        case ChannelKind::QuantizedGaussian: {
            const double sigma = std::sqrt(model.noise_var);
            for (std::size_t i = 0; i < y.size(); ++i)
                ll += quantized_cell_log_prob(y[i], mu[i], sigma);
            break;
        }
        case ChannelKind::Poisson: {
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (y[i] < 0.0 || std::floor(y[i]) != y[i])
                    throw std::invalid_argument("count channel output must be a nonnegative integer");
                const double lambda = poisson_rate(mu[i], model.noise_var);
                ll += y[i] * std::log(lambda) - lambda - std::lgamma(y[i] + 1.0);
            }
            break;
        }
    }
    return ll;
}

}  // namespace gansic
