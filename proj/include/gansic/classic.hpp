#pragma once

#include <functional>
#include <span>

#include "gansic/channel.hpp"
#include "gansic/matrix.hpp"
#include "gansic/rng.hpp"

namespace gansic {

// Per-user soft symbol estimates: row k holds user k's distribution over the
// constellation points.
struct SoftBelief {
    DenseMatrix probs;  // K x |S|

    void validate(double tol = 1e-9) const;
};

struct SicConfig {
    std::size_t iterations = 5;
};

struct SicResult {
    SoftBelief beliefs;
    std::vector<double> hard;
};

// Soft interference cancellation with parallel (Jacobi) belief updates: each
// iteration rebuilds every user's posterior from the previous iteration's
// soft means and variances, using the full residual covariance.
SicResult iterative_sic(std::span<const double> y, const ChannelModel& model,
                        const Constellation& cons, const SicConfig& cfg);

// Exhaustive maximum-likelihood search over all |S|^K candidates. Ties break
// toward the lexicographically smallest constellation-index tuple.
std::vector<double> map_detect(std::span<const double> y, const ChannelModel& model,
                               const Constellation& cons);

// Hard decision from a belief row: argmax with lowest-index tie-break.
std::size_t argmax_index(std::span<const double> probs);

// Batch of detections: input is N x R received rows, output must be N x K
// hard symbol values.
using BatchDetector = std::function<DenseMatrix(const DenseMatrix& ys)>;

BatchDetector per_vector_detector(
    std::function<std::vector<double>(std::span<const double>)> fn, std::size_t K);

struct SerOptions {
    std::size_t max_vectors = 100000;
    std::size_t min_vectors = 1000;   // floor honored even when stopping early
    std::size_t target_errors = 0;    // 0 disables early stop
};

struct SerResult {
    double ser = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t symbols = 0;
    std::uint64_t vectors = 0;
};

// Monte Carlo symbol error rate: draw uniform symbol vectors, push them
// through the channel, compare hard decisions per user. Vectors are processed
// in chunks for batch detectors, but the rng consumption order is exactly the
// per-vector sequence (all of vector t's draws before vector t+1's), so chunk
// size never changes the stream.
SerResult ser_estimate(const BatchDetector& detector, const ChannelModel& model,
                       const Constellation& cons, Rng& rng, const SerOptions& opts);

// Symbol mismatch count between two equally sized N x K matrices.
std::uint64_t count_symbol_errors(const DenseMatrix& decided, const DenseMatrix& truth);

}  // namespace gansic
