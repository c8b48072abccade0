#pragma once

#include <vector>

#include "gansic/matrix.hpp"

namespace gansic {

// Probabilities are clamped into [kProbClamp, 1 - kProbClamp] before any log
// is taken; the matching derivative helpers return zero outside that window
// so analytic gradients agree with finite differences of the clamped loss.
constexpr double kProbClamp = 1e-12;

double clamp_prob(double p);
double safe_log(double p);        // ln(clamp(p))
double safe_log1m(double p);      // ln(clamp(1 - p))
double dlog_dp(double p);         // d safe_log / dp
double dlog1m_dp(double p);       // d safe_log1m / dp

// Mean negative log-likelihood of integer labels under per-row categorical
// distributions (rows already sum to one).
double cross_entropy_mean(const DenseMatrix& probs, const std::vector<int>& labels);

// Gradient of cross_entropy_mean w.r.t. the softmax pre-activations:
// (q - onehot) / batch. Feed through mlp_backward's extra_preact_grad.
DenseMatrix ce_softmax_preact_grad(const DenseMatrix& probs, const std::vector<int>& labels);

}  // namespace gansic
