#include "gansic/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gansic {

double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

double safe_log(double p) { return std::log(clamp_prob(p)); }

double safe_log1m(double p) { return std::log(clamp_prob(1.0 - p)); }

double dlog_dp(double p) {
    if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
    return 1.0 / p;
}

double dlog1m_dp(double p) {
    const double q = 1.0 - p;
    if (q < kProbClamp || q > 1.0 - kProbClamp) return 0.0;
    return -1.0 / q;
}

double cross_entropy_mean(const DenseMatrix& probs, const std::vector<int>& labels) {
    if (labels.size() != probs.rows)
        throw std::invalid_argument("cross_entropy_mean: label count does not match batch");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= probs.cols)
            throw std::invalid_argument("cross_entropy_mean: label out of range");
        total -= safe_log(probs.at(r, static_cast<std::size_t>(label)));
    }
    return total / static_cast<double>(probs.rows);
}

DenseMatrix ce_softmax_preact_grad(const DenseMatrix& probs, const std::vector<int>& labels) {
    if (labels.size() != probs.rows)
        throw std::invalid_argument("ce_softmax_preact_grad: label count does not match batch");
    DenseMatrix grad = probs;
    const double inv_b = 1.0 / static_cast<double>(probs.rows);
    for (std::size_t r = 0; r < grad.rows; ++r) {
        const int label = labels[r];
        if (label < 0 || static_cast<std::size_t>(label) >= grad.cols)
            throw std::invalid_argument("ce_softmax_preact_grad: label out of range");
        grad.at(r, static_cast<std::size_t>(label)) -= 1.0;
        double* row = grad.row(r);
        for (std::size_t c = 0; c < grad.cols; ++c) row[c] *= inv_b;
    }
    return grad;
}

}  // namespace gansic
