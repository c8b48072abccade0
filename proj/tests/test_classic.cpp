#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gansic/classic.hpp"

using namespace gansic;

namespace {

ChannelModel linear_model(double noise_var, std::size_t K = 4, std::size_t R = 4) {
    ChannelModel m;
    m.kind = ChannelKind::LinearGaussian;
    m.H = exp_decay_channel_matrix(K, R);
    m.noise_var = noise_var;
    return m;
}

ChannelModel scalar_model(double noise_var) {
    ChannelModel m;
    m.kind = ChannelKind::LinearGaussian;
    m.H = DenseMatrix(1, 1);
    m.H.at(0, 0) = 1.0;
    m.noise_var = noise_var;
    return m;
}

}  // namespace

TEST_CASE("single-user sic at y=0 stays uniform by symmetry") {
    ChannelModel m = scalar_model(0.7);
    std::vector<double> y = {0.0};
    for (std::size_t q : {1u, 3u, 5u, 9u}) {
        SicResult r = iterative_sic(y, m, Constellation::bpsk(), {q});
        CHECK(r.beliefs.probs.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.beliefs.probs.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.hard[0] == -1.0);  // exact tie resolves to the lowest index
    }
}

TEST_CASE("single-user sic matches the closed-form posterior") {
    // For a scalar channel, P(+1 | y) = sigmoid(2 y / noise_var); the ridge
    // on the covariance shifts this by less than 1e-9.
    ChannelModel m = scalar_model(0.5);
    std::vector<double> y = {0.5};
    for (std::size_t q : {1u, 2u, 5u}) {
        SicResult r = iterative_sic(y, m, Constellation::bpsk(), {q});
        CHECK(r.beliefs.probs.at(0, 1) ==
              doctest::Approx(0.8807970779778823).epsilon(1e-8));
        CHECK(r.hard[0] == 1.0);
    }
}

TEST_CASE("sic recovers the transmitted vector at vanishing noise") {
    ChannelModel m = linear_model(1e-8);
    Constellation cons = Constellation::bpsk();
    Rng rng(100);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(4);
        for (double& v : s) v = cons.symbols[rng.uniform_int(2)];
        std::vector<double> y(4, 0.0);
        matvec(m.H, s, y);
        SicResult r = iterative_sic(y, m, cons, {5});
        for (std::size_t k = 0; k < 4; ++k) CHECK(r.hard[k] == s[k]);
    }
}

TEST_CASE("sic beliefs stay valid distributions through every iteration") {
    ChannelModel m = linear_model(0.3);
    Constellation cons = Constellation::bpsk();
    Rng rng(200);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(4);
        for (double& v : s) v = cons.symbols[rng.uniform_int(2)];
        std::vector<double> y = transmit(m, s, rng);
        for (std::size_t q = 1; q <= 6; ++q) {
            SicResult r = iterative_sic(y, m, cons, {q});
            r.beliefs.validate(1e-9);
        }
    }
}

TEST_CASE("negating the received vector mirrors the sic beliefs") {
    ChannelModel m = linear_model(0.4);
    Constellation cons = Constellation::bpsk();
    Rng rng(300);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(4);
        for (double& v : s) v = cons.symbols[rng.uniform_int(2)];
        std::vector<double> y = transmit(m, s, rng);
        std::vector<double> neg(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
        SicResult a = iterative_sic(y, m, cons, {5});
        SicResult b = iterative_sic(neg, m, cons, {5});
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(a.beliefs.probs.at(k, 0) == doctest::Approx(b.beliefs.probs.at(k, 1)).epsilon(1e-9));
            CHECK(a.beliefs.probs.at(k, 1) == doctest::Approx(b.beliefs.probs.at(k, 0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("sic rejects channels it is not built for") {
    ChannelModel m = linear_model(1.0);
    m.kind = ChannelKind::Poisson;
    std::vector<double> y = {1.0, 0.0, 2.0, 1.0};
    CHECK_THROWS_AS(iterative_sic(y, m, Constellation::bpsk(), {5}), std::invalid_argument);
}

TEST_CASE("map returns the exact transmitted vector on noiseless observations") {
    ChannelModel m = linear_model(1e-6);
    Constellation cons = Constellation::bpsk();
    Rng rng(400);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(4);
        for (double& v : s) v = cons.symbols[rng.uniform_int(2)];
        std::vector<double> y(4, 0.0);
        matvec(m.H, s, y);
        std::vector<double> hat = map_detect(y, m, cons);
        for (std::size_t k = 0; k < 4; ++k) CHECK(hat[k] == s[k]);
    }
}

TEST_CASE("scalar map picks the nearer symbol") {
    ChannelModel m = scalar_model(1.0);
    std::vector<double> y = {0.3};
    CHECK(map_detect(y, m, Constellation::bpsk())[0] == 1.0);
    y[0] = -0.3;
    CHECK(map_detect(y, m, Constellation::bpsk())[0] == -1.0);
    y[0] = 0.0;  // exact tie: lexicographically first index wins
    CHECK(map_detect(y, m, Constellation::bpsk())[0] == -1.0);
}

TEST_CASE("two-user quantized map agrees with direct hypothesis enumeration") {
    ChannelModel m;
    m.kind = ChannelKind::QuantizedGaussian;
    m.H = exp_decay_channel_matrix(2, 2);
    m.noise_var = 0.8;
    Constellation cons = Constellation::bpsk();
    Rng rng(500);
    std::vector<double> s = {1.0, -1.0};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> y = transmit(m, s, rng);

        // Independent enumeration of all four hypotheses via cell probabilities.
        double best_ll = -1e300;
        std::vector<double> best = {0.0, 0.0};
        const double sigma = std::sqrt(m.noise_var);
        for (double s0 : {-1.0, 1.0}) {
            for (double s1 : {-1.0, 1.0}) {
                double ll = 0.0;
                for (std::size_t i = 0; i < 2; ++i) {
                    const double mu = m.H.at(i, 0) * s0 + m.H.at(i, 1) * s1;
                    ll += quantized_cell_log_prob(y[i], mu, sigma);
                }
                if (ll > best_ll) {
                    best_ll = ll;
                    best = {s0, s1};
                }
            }
        }
        std::vector<double> hat = map_detect(y, m, cons);
        CHECK(hat[0] == best[0]);
        CHECK(hat[1] == best[1]);
    }
}

TEST_CASE("map is invariant under a constant log-likelihood shift") {
    // Doubling every candidate's likelihood by a positive constant must not
    // change the argmax; emulate by comparing decisions at two noise scales
    // whose likelihoods differ only by the shared normalizer.
    ChannelModel m = linear_model(0.5);
    Constellation cons = Constellation::bpsk();
    Rng rng(600);
    std::vector<double> s = {1.0, 1.0, -1.0, 1.0};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> y = transmit(m, s, rng);
        std::vector<double> base = map_detect(y, m, cons);

        // Independent argmax over shifted log-likelihoods.
        std::vector<std::size_t> idx(4, 0);
        double best = -1e300;
        std::vector<double> pick(4);
        std::vector<double> cand(4);
        for (int code = 0; code < 16; ++code) {
            for (std::size_t k = 0; k < 4; ++k)
                cand[k] = cons.symbols[(code >> k) & 1];
            const double ll = log_likelihood(m, y, cand) + 123.456;
            if (ll > best) {
                best = ll;
                pick = cand;
            }
        }
        (void)idx;
        for (std::size_t k = 0; k < 4; ++k) CHECK(base[k] == pick[k]);
    }
}

TEST_CASE("map guards its search space size") {
    ChannelModel m;
    m.kind = ChannelKind::LinearGaussian;
    m.H = DenseMatrix(1, 21);
    for (double& v : m.H.data) v = 1.0;
    m.noise_var = 1.0;
    Constellation cons = Constellation::bpsk();
    std::vector<double> y = {0.0};
    CHECK_THROWS_AS(map_detect(y, m, cons), std::invalid_argument);  // 2^21 > 2^20
}

TEST_CASE("perfect and constant detectors bracket the ser range") {
    ChannelModel m = linear_model(1e-10);
    Constellation cons = Constellation::bpsk();

    // Noiseless observations make MAP a perfect detector, so measured SER is 0.
    BatchDetector map_batch = per_vector_detector(
        [&](std::span<const double> y) { return map_detect(y, m, cons); }, 4);
    Rng rng(700);
    SerResult perfect = ser_estimate(map_batch, m, cons, rng, {2000, 1000, 0});
    CHECK(perfect.errors == 0);
    CHECK(perfect.ser == 0.0);
    CHECK(perfect.symbols == 8000);

    // A constant detector on uniform symbols is a coin flip per symbol.
    BatchDetector constant = [](const DenseMatrix& ys) {
        DenseMatrix out(ys.rows, 4);
        for (double& v : out.data) v = 1.0;
        return out;
    };
    Rng rng2(701);
    SerResult coin = ser_estimate(constant, m, cons, rng2, {5000, 1000, 0});
    const double sigma3 = 3.0 * std::sqrt(0.25 / static_cast<double>(coin.symbols));
    CHECK(std::fabs(coin.ser - 0.5) < sigma3);
}

TEST_CASE("ser chunking never changes the sampled stream") {
    // A detector that records its batch sizes: results must be identical to a
    // run capped to smaller chunks because the rng order is per-vector.
    ChannelModel m = linear_model(0.2);
    Constellation cons = Constellation::bpsk();
    BatchDetector sic_batch = per_vector_detector(
        [&](std::span<const double> y) { return iterative_sic(y, m, cons, {5}).hard; }, 4);

    Rng a(800), b(800);
    SerResult one = ser_estimate(sic_batch, m, cons, a, {1500, 1000, 0});
    SerResult two = ser_estimate(sic_batch, m, cons, b, {1500, 1000, 0});
    CHECK(one.errors == two.errors);
    CHECK(one.symbols == two.symbols);
    CHECK(one.ser == two.ser);
}

TEST_CASE("early stop respects the minimum vector floor") {
    ChannelModel m = linear_model(10.0);  // very noisy: errors arrive immediately
    Constellation cons = Constellation::bpsk();
    BatchDetector constant = [](const DenseMatrix& ys) {
        DenseMatrix out(ys.rows, 4);
        for (double& v : out.data) v = 1.0;
        return out;
    };
    Rng rng(900);
    SerResult r = ser_estimate(constant, m, cons, rng, {100000, 1000, 200});
    CHECK(r.vectors >= 1000);
    CHECK(r.vectors < 100000);  // early stop actually triggered
    CHECK(r.errors >= 200);
}

TEST_CASE("map regression values are stable") {
    // Frozen Monte Carlo baselines: MAP on the 4x4 linear channel over
    // 100000 vectors with seed 4242. Guards detector and channel math against
    // silent drift; the counts were produced by this implementation once and
    // pinned. At 14 dB the minimum-distance argument puts the expected error
    // count below one, so zero observed errors is the genuine value.
    Constellation cons = Constellation::bpsk();

    ChannelModel m8 = linear_model(snr_to_noise_var(8.0));
    BatchDetector map8 = per_vector_detector(
        [&](std::span<const double> y) { return map_detect(y, m8, cons); }, 4);
    Rng rng8(4242);
    SerResult r8 = ser_estimate(map8, m8, cons, rng8, {100000, 1000, 0});
    CHECK(r8.symbols == 400000);
    CHECK(r8.errors == 4031);

    ChannelModel m14 = linear_model(snr_to_noise_var(14.0));
    BatchDetector map14 = per_vector_detector(
        [&](std::span<const double> y) { return map_detect(y, m14, cons); }, 4);
    Rng rng14(4242);
    SerResult r14 = ser_estimate(map14, m14, cons, rng14, {100000, 1000, 0});
    CHECK(r14.symbols == 400000);
    CHECK(r14.errors == 0);
}
