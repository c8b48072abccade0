#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace gansic {

// Seeded random source. The distributions are implemented here rather than
// with std::*_distribution, whose output is unspecified and differs between
// standard libraries; every draw below is a fixed function of the mt19937_64
// stream, so a seed pins the exact sequence.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: empty range");
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    // standard normal via Box-Muller; the spare keeps draws paired
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * kPi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Knuth's product method; fine for the moderate rates used here
    long poisson(double lambda) {
        if (!(lambda > 0.0)) throw std::invalid_argument("poisson: lambda must be positive");
        if (lambda > 700.0) throw std::invalid_argument("poisson: lambda too large for product method");
        const double limit = std::exp(-lambda);
        long k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // independent child stream; a pure function of (seed, label), so forks do
    // not disturb or depend on the parent's position in its stream
    Rng fork(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

    static std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix(base);
        for (char c : label) h = (h ^ static_cast<std::uint8_t>(c)) * 0x100000001b3ULL;
        return splitmix(h);
    }

  private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gansic
