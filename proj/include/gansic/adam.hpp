#pragma once

#include <cstdint>
#include <vector>

namespace gansic {

struct AdamConfig {
    double alpha = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second-moment state over a flat parameter vector. The slot order is
// whatever trainable_slots() produced for the owning network; the state is
// tied to that ordering and length.
struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    AdamState() = default;
    AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
    explicit AdamState(std::size_t n) : AdamState(n, AdamConfig{}) {}
};

// One bias-corrected update over `slots`. `ascend` negates the gradient,
// which is bitwise identical to descending the negated objective.
void adam_step(AdamState& state, const std::vector<double*>& slots,
               const std::vector<double>& grads, bool ascend = false);

}  // namespace gansic
