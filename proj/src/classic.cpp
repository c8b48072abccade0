#include "gansic/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gansic {

void SoftBelief::validate(double tol) const {
    for (std::size_t k = 0; k < probs.rows; ++k) {
        double sum = 0.0;
        for (std::size_t s = 0; s < probs.cols; ++s) {
            const double p = probs.at(k, s);
            if (p < 0.0) throw std::logic_error("negative belief probability");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > tol) throw std::logic_error("belief row does not sum to 1");
    }
}

std::size_t argmax_index(std::span<const double> probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return best;
}

namespace {

constexpr double kCovRidge = 1e-9;

// In-place Cholesky factorization L L^T = C followed by a solve; returns
// d^T C^{-1} d. C is small (R x R), so this stays dense and simple.
double quad_form_solve(DenseMatrix C, std::vector<double> d) {
    const std::size_t n = C.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double diag = C.at(j, j);
        for (std::size_t p = 0; p < j; ++p) diag -= C.at(j, p) * C.at(j, p);
        if (diag <= 0.0) throw std::runtime_error("residual covariance is not positive definite");
        const double l = std::sqrt(diag);
        C.at(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = C.at(i, j);
            for (std::size_t p = 0; p < j; ++p) v -= C.at(i, p) * C.at(j, p);
            C.at(i, j) = v / l;
        }
    }
    // Forward solve L z = d; then d^T C^{-1} d = ||z||^2.
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = d[i];
        for (std::size_t p = 0; p < i; ++p) v -= C.at(i, p) * d[p];
        d[i] = v / C.at(i, i);
        quad += d[i] * d[i];
    }
    return quad;
}

}  // namespace

SicResult iterative_sic(std::span<const double> y, const ChannelModel& model,
                        const Constellation& cons, const SicConfig& cfg) {
    model.validate();
    cons.validate();
    if (model.kind != ChannelKind::LinearGaussian)
        throw std::invalid_argument("iterative_sic requires the linear Gaussian channel");
    if (y.size() != model.receivers())
        throw std::invalid_argument("received vector length does not match channel");
    if (cfg.iterations == 0) throw std::invalid_argument("iteration count must be >= 1");

    const std::size_t K = model.users();
    const std::size_t R = model.receivers();
    const std::size_t M = cons.size();

    DenseMatrix q(K, M);
    for (double& v : q.data) v = 1.0 / static_cast<double>(M);

    std::vector<double> e(K), var(K);
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        for (std::size_t j = 0; j < K; ++j) {
            double mean = 0.0, second = 0.0;
            for (std::size_t s = 0; s < M; ++s) {
                mean += cons.symbols[s] * q.at(j, s);
                second += cons.symbols[s] * cons.symbols[s] * q.at(j, s);
            }
            e[j] = mean;
            var[j] = second - mean * mean;
        }

        DenseMatrix next(K, M);
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<double> resid(y.begin(), y.end());
            for (std::size_t j = 0; j < K; ++j) {
                if (j == k) continue;
                for (std::size_t i = 0; i < R; ++i) resid[i] -= model.H.at(i, j) * e[j];
            }

            DenseMatrix C(R, R);
            for (std::size_t i = 0; i < R; ++i) C.at(i, i) = model.noise_var + kCovRidge;
            for (std::size_t j = 0; j < K; ++j) {
                if (j == k) continue;
                for (std::size_t a = 0; a < R; ++a)
                    for (std::size_t b = 0; b < R; ++b)
                        C.at(a, b) += var[j] * model.H.at(a, j) * model.H.at(b, j);
            }

            std::vector<double> logq(M);
            for (std::size_t s = 0; s < M; ++s) {
                std::vector<double> d(R);
                for (std::size_t i = 0; i < R; ++i)
                    d[i] = resid[i] - model.H.at(i, k) * cons.symbols[s];
                logq[s] = -0.5 * quad_form_solve(C, std::move(d));
            }
            const double mx = *std::max_element(logq.begin(), logq.end());
            double sum = 0.0;
            for (std::size_t s = 0; s < M; ++s) {
                logq[s] = std::exp(logq[s] - mx);
                sum += logq[s];
            }
            for (std::size_t s = 0; s < M; ++s) next.at(k, s) = logq[s] / sum;
        }
        q = std::move(next);
    }

    SicResult result;
    result.beliefs.probs = std::move(q);
    result.hard.resize(K);
    for (std::size_t k = 0; k < K; ++k)
        result.hard[k] = cons.symbols[argmax_index(result.beliefs.probs.row_span(k))];
    return result;
}

std::vector<double> map_detect(std::span<const double> y, const ChannelModel& model,
                               const Constellation& cons) {
    model.validate();
    cons.validate();
    const std::size_t K = model.users();
    const std::size_t M = cons.size();
    double space = 1.0;
    for (std::size_t k = 0; k < K; ++k) {
        space *= static_cast<double>(M);
        if (space > static_cast<double>(1u << 20))
            throw std::invalid_argument("map_detect search space exceeds 2^20 candidates");
    }

    std::vector<std::size_t> idx(K, 0), best_idx(K, 0);
    std::vector<double> cand(K);
    double best_ll = -std::numeric_limits<double>::infinity();
    bool first = true;
    while (true) {
        for (std::size_t k = 0; k < K; ++k) cand[k] = cons.symbols[idx[k]];
        const double ll = log_likelihood(model, y, cand);
        // Strict improvement keeps the lexicographically smallest index tuple
        // on ties (candidates are enumerated in lexicographic order).
        if (first || ll > best_ll) {
            best_ll = ll;
            best_idx = idx;
            first = false;
        }
        std::size_t pos = K;
        while (pos-- > 0) {
            if (++idx[pos] < M) break;
            idx[pos] = 0;
            if (pos == 0) {
                std::vector<double> best(K);
                for (std::size_t k = 0; k < K; ++k) best[k] = cons.symbols[best_idx[k]];
                return best;
            }
        }
    }
}

BatchDetector per_vector_detector(
    std::function<std::vector<double>(std::span<const double>)> fn, std::size_t K) {
    return [fn = std::move(fn), K](const DenseMatrix& ys) {
        DenseMatrix out(ys.rows, K);
        for (std::size_t r = 0; r < ys.rows; ++r) {
            const std::vector<double> hard = fn(ys.row_span(r));
            if (hard.size() != K) throw std::logic_error("detector returned wrong symbol count");
            std::copy(hard.begin(), hard.end(), out.row(r));
        }
        return out;
    };
}

std::uint64_t count_symbol_errors(const DenseMatrix& decided, const DenseMatrix& truth) {
    if (!decided.same_shape(truth))
        throw std::invalid_argument("count_symbol_errors: shape mismatch");
    std::uint64_t errors = 0;
    for (std::size_t i = 0; i < decided.data.size(); ++i)
        if (decided.data[i] != truth.data[i]) ++errors;
    return errors;
}

SerResult ser_estimate(const BatchDetector& detector, const ChannelModel& model,
                       const Constellation& cons, Rng& rng, const SerOptions& opts) {
    model.validate();
    cons.validate();
    if (opts.max_vectors == 0) throw std::invalid_argument("ser_estimate: empty budget");

    const std::size_t K = model.users();
    const std::size_t R = model.receivers();
    constexpr std::size_t kChunk = 512;

    SerResult result;
    std::vector<double> s(K);
    while (result.vectors < opts.max_vectors) {
        const std::size_t n = std::min(kChunk, opts.max_vectors - result.vectors);
        DenseMatrix truth(n, K), ys(n, R);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t k = 0; k < K; ++k)
                s[k] = cons.symbols[rng.uniform_int(cons.size())];
            std::copy(s.begin(), s.end(), truth.row(t));
            const std::vector<double> y = transmit(model, s, rng);
            std::copy(y.begin(), y.end(), ys.row(t));
        }
        const DenseMatrix decided = detector(ys);
        if (decided.rows != n || decided.cols != K)
            throw std::logic_error("detector returned wrong batch shape");
        result.errors += count_symbol_errors(decided, truth);
        result.vectors += n;
        if (opts.target_errors > 0 && result.errors >= opts.target_errors &&
            result.vectors >= opts.min_vectors)
            break;
    }
    result.symbols = result.vectors * K;
    result.ser = static_cast<double>(result.errors) / static_cast<double>(result.symbols);
    return result;
}

}  // namespace gansic
