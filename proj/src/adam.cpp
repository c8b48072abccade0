#include "gansic/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gansic {

void adam_step(AdamState& state, const std::vector<double*>& slots,
               const std::vector<double>& grads, bool ascend) {
    if (slots.size() != grads.size())
        throw std::invalid_argument("adam_step: gradient length does not match slots");
    if (state.m.size() != slots.size())
        throw std::invalid_argument("adam_step: state length does not match slots");

    state.t += 1;
    const AdamConfig& c = state.config;
    const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double g = ascend ? -grads[i] : grads[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
        const double mhat = state.m[i] / corr1;
        const double vhat = state.v[i] / corr2;
        *slots[i] -= c.alpha * mhat / (std::sqrt(vhat) + c.eps);
    }
}

}  // namespace gansic
