#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gansic/adam.hpp"
#include "gansic/losses.hpp"
#include "gansic/matrix.hpp"
#include "gansic/nn.hpp"
#include "gansic/rng.hpp"

using namespace gansic;

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

double weighted_output_loss(const NetworkParams& net, const DenseMatrix& input, Mode mode,
                            const DenseMatrix& w) {
    DenseMatrix out = mlp_forward(net, input, mode, nullptr);
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) s += w.data[i] * out.data[i];
    return s;
}

double max_rel_err(const std::vector<double>& ga, const std::vector<double>& gf) {
    REQUIRE(ga.size() == gf.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
        const double denom = std::max({std::fabs(ga[i]), std::fabs(gf[i]), 1e-3});
        worst = std::max(worst, std::fabs(ga[i] - gf[i]) / denom);
    }
    return worst;
}

// Central finite differences over every trainable slot of `net`.
template <typename LossFn>
std::vector<double> fd_param_grads(NetworkParams& net, LossFn loss) {
    const double h = 1e-5;
    std::vector<double*> slots = trainable_slots(net);
    std::vector<double> grads(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const double saved = *slots[i];
        *slots[i] = saved + h;
        const double up = loss();
        *slots[i] = saved - h;
        const double down = loss();
        *slots[i] = saved;
        grads[i] = (up - down) / (2.0 * h);
    }
    return grads;
}

std::vector<double> fd_input_grads(const NetworkParams& net, DenseMatrix& input, Mode mode,
                                   const DenseMatrix& w) {
    const double h = 1e-5;
    std::vector<double> grads(input.data.size());
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        const double saved = input.data[i];
        input.data[i] = saved + h;
        const double up = weighted_output_loss(net, input, mode, w);
        input.data[i] = saved - h;
        const double down = weighted_output_loss(net, input, mode, w);
        input.data[i] = saved;
        grads[i] = (up - down) / (2.0 * h);
    }
    return grads;
}

void check_weighted_loss_grads(NetworkParams& net, std::size_t batch, Mode mode, Rng& rng) {
    DenseMatrix input = random_matrix(batch, net.input_dim(), rng);
    DenseMatrix w = random_matrix(batch, net.output_dim(), rng);

    ForwardCache cache;
    mlp_forward(net, input, mode, &cache);
    DenseMatrix grad_input;
    Gradients analytic = mlp_backward(net, cache, w, &grad_input);

    auto loss = [&]() { return weighted_output_loss(net, input, mode, w); };
    const std::vector<double> fd = fd_param_grads(net, loss);
    CHECK(max_rel_err(flatten_gradients(analytic), fd) < 1e-4);

    const std::vector<double> fd_in = fd_input_grads(net, input, mode, w);
    CHECK(max_rel_err(grad_input.data, fd_in) < 1e-4);
}

}  // namespace

TEST_CASE("matmul matches hand-computed products") {
    DenseMatrix a(2, 3);
    a.data = {1, 2, 3, 4, 5, 6};
    DenseMatrix b(3, 2);
    b.data = {7, 8, 9, 10, 11, 12};
    DenseMatrix c = matmul(a, b);
    CHECK(c.rows == 2);
    CHECK(c.cols == 2);
    CHECK(c.at(0, 0) == doctest::Approx(58).epsilon(1e-14));
    CHECK(c.at(0, 1) == doctest::Approx(64).epsilon(1e-14));
    CHECK(c.at(1, 0) == doctest::Approx(139).epsilon(1e-14));
    CHECK(c.at(1, 1) == doctest::Approx(154).epsilon(1e-14));
}

TEST_CASE("transposed products agree with explicit transposes") {
    Rng rng(11);
    DenseMatrix a = random_matrix(4, 3, rng);
    DenseMatrix b = random_matrix(4, 5, rng);

    DenseMatrix at(3, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) at.at(c, r) = a.at(r, c);
    DenseMatrix expect_tn = matmul(at, b);
    DenseMatrix got_tn = matmul_tn(a, b);
    for (std::size_t i = 0; i < expect_tn.data.size(); ++i)
        CHECK(got_tn.data[i] == doctest::Approx(expect_tn.data[i]).epsilon(1e-12));

    DenseMatrix bt(5, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 5; ++c) bt.at(c, r) = b.at(r, c);
    DenseMatrix got_nt = matmul_nt(at, bt);  // (3x4)(5x4)^T = 3x5
    DenseMatrix expect = matmul(at, b);
    REQUIRE(got_nt.rows == expect.rows);
    REQUIRE(got_nt.cols == expect.cols);
    for (std::size_t i = 0; i < expect.data.size(); ++i)
        CHECK(got_nt.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
}

TEST_CASE("matmul rejects mismatched shapes") {
    DenseMatrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("rng streams are deterministic and fork independently") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng parent(7);
    Rng f1 = parent.fork("alpha");
    Rng f2 = parent.fork("alpha");
    Rng f3 = parent.fork("beta");
    CHECK(f1.next_u64() == f2.next_u64());
    CHECK(f1.next_u64() != f3.next_u64());

    // Forking must not disturb the parent stream.
    Rng p1(7), p2(7);
    (void)p1.fork("x");
    CHECK(p1.next_u64() == p2.next_u64());
}

TEST_CASE("rng distributions have the expected ranges and moments") {
    Rng rng(123);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.02));

    double nsum = 0.0, nsq = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = rng.normal();
        nsum += x;
        nsq += x * x;
    }
    CHECK(nsum / 20000.0 == doctest::Approx(0.0).scale(1).epsilon(0.05));
    CHECK(nsq / 20000.0 == doctest::Approx(1.0).epsilon(0.05));

    double psum = 0.0;
    for (int i = 0; i < 20000; ++i) psum += static_cast<double>(rng.poisson(3.5));
    CHECK(psum / 20000.0 == doctest::Approx(3.5).epsilon(0.05));

    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = rng.uniform_int(7);
        CHECK(v < 7);
    }
    CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
    CHECK_THROWS_AS(rng.poisson(0.0), std::invalid_argument);
}

TEST_CASE("forward pass of a bare affine layer matches direct arithmetic") {
    NetworkParams net;
    Layer layer;
    layer.weight = DenseMatrix(2, 2);
    layer.weight.data = {1.0, 2.0, 3.0, 4.0};
    layer.bias = {0.5, -0.5};
    layer.activation = Activation::Identity;
    net.layers.push_back(layer);

    std::vector<double> out = mlp_forward(net, std::vector<double>{1.0, 1.0}, Mode::Eval);
    CHECK(out[0] == doctest::Approx(4.5).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(5.5).epsilon(1e-14));
}

TEST_CASE("softmax rows are normalized and shift-invariant") {
    Rng rng(5);
    NetworkParams net = make_mlp(3, {{4, Activation::Softmax, false}}, rng);
    DenseMatrix input = random_matrix(8, 3, rng);
    DenseMatrix out = mlp_forward(net, input, Mode::Eval);
    for (std::size_t r = 0; r < out.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < out.cols; ++c) {
            s += out.at(r, c);
            CHECK(out.at(r, c) > 0.0);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Shifting every bias by a constant must not change the softmax output.
    NetworkParams shifted = net;
    for (double& b : shifted.layers[0].bias) b += 37.5;
    DenseMatrix out2 = mlp_forward(shifted, input, Mode::Eval);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(out2.data[i] == doctest::Approx(out.data[i]).epsilon(1e-9));
}

TEST_CASE("train-mode batch norm standardizes the batch") {
    Rng rng(17);
    NetworkParams net = make_mlp(3, {{5, Activation::Identity, true}}, rng);
    DenseMatrix input = random_matrix(32, 3, rng);
    for (double& v : input.data) v = 2.0 * v + 1.0;

    DenseMatrix out = mlp_forward(net, input, Mode::Train);
    for (std::size_t c = 0; c < out.cols; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < out.rows; ++r) mean += out.at(r, c);
        mean /= static_cast<double>(out.rows);
        for (std::size_t r = 0; r < out.rows; ++r) {
            const double d = out.at(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(out.rows);
        CHECK(mean == doctest::Approx(0.0).scale(1).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps in the denominator
    }
}

TEST_CASE("eval-mode batch norm uses running statistics") {
    Rng rng(18);
    NetworkParams net = make_mlp(2, {{2, Activation::Identity, true}}, rng);
    BatchNormState& bn = *net.layers[0].batchnorm;
    bn.running_mean = {1.0, -2.0};
    bn.running_var = {4.0, 0.25};
    bn.gamma = {2.0, 1.0};
    bn.beta = {0.0, 3.0};

    // With W and b forming the affine z, eval output is gamma*(z-mean)/sqrt(var+eps)+beta.
    DenseMatrix input(1, 2);
    input.data = {0.3, -0.7};
    DenseMatrix z = matmul(input, net.layers[0].weight);
    z.at(0, 0) += net.layers[0].bias[0];
    z.at(0, 1) += net.layers[0].bias[1];
    DenseMatrix out = mlp_forward(net, input, Mode::Eval);
    CHECK(out.at(0, 0) ==
          doctest::Approx(2.0 * (z.at(0, 0) - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
    CHECK(out.at(0, 1) ==
          doctest::Approx(1.0 * (z.at(0, 1) + 2.0) / std::sqrt(0.25 + 1e-5) + 3.0).epsilon(1e-12));
}

TEST_CASE("committing batch norm stats applies the momentum update") {
    Rng rng(19);
    NetworkParams net = make_mlp(2, {{3, Activation::Tanh, true}}, rng);
    DenseMatrix input = random_matrix(16, 2, rng);

    ForwardCache cache;
    mlp_forward(net, input, Mode::Train, &cache);

    const std::vector<double> prior_mean = net.layers[0].batchnorm->running_mean;
    const std::vector<double> prior_var = net.layers[0].batchnorm->running_var;
    const std::vector<double> batch_mean = cache.layers[0].batch_mean;
    const std::vector<double> batch_var = cache.layers[0].batch_var;

    commit_batchnorm_stats(net, cache);
    const double unbias = 16.0 / 15.0;
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(net.layers[0].batchnorm->running_mean[c] ==
              doctest::Approx(0.9 * prior_mean[c] + 0.1 * batch_mean[c]).epsilon(1e-12));
        CHECK(net.layers[0].batchnorm->running_var[c] ==
              doctest::Approx(0.9 * prior_var[c] + 0.1 * batch_var[c] * unbias).epsilon(1e-12));
    }

    // A const forward never touches running statistics on its own.
    NetworkParams frozen = net;
    const std::uint64_t before = params_checksum(frozen);
    ForwardCache scratch;
    mlp_forward(frozen, input, Mode::Train, &scratch);
    CHECK(params_checksum(frozen) == before);
}

TEST_CASE("backward gradients match finite differences across layer shapes") {
    Rng rng(23);

    SUBCASE("single identity layer") {
        NetworkParams net = make_mlp(3, {{2, Activation::Identity, false}}, rng);
        check_weighted_loss_grads(net, 4, Mode::Eval, rng);
    }
    SUBCASE("deep tanh stack") {
        NetworkParams net = make_mlp(
            4, {{5, Activation::Tanh, false}, {4, Activation::Tanh, false}, {3, Activation::Identity, false}},
            rng);
        check_weighted_loss_grads(net, 3, Mode::Eval, rng);
    }
    SUBCASE("batch-normalized tanh, train mode") {
        NetworkParams net =
            make_mlp(4, {{6, Activation::Tanh, true}, {2, Activation::Identity, false}}, rng);
        check_weighted_loss_grads(net, 5, Mode::Train, rng);
    }
    SUBCASE("batch-normalized tanh, eval mode with warmed running stats") {
        NetworkParams net =
            make_mlp(4, {{6, Activation::Tanh, true}, {2, Activation::Identity, false}}, rng);
        BatchNormState& bn = *net.layers[0].batchnorm;
        for (std::size_t c = 0; c < 6; ++c) {
            bn.running_mean[c] = 0.3 * static_cast<double>(c) - 0.5;
            bn.running_var[c] = 0.5 + 0.2 * static_cast<double>(c);
            bn.gamma[c] = 1.0 + 0.1 * static_cast<double>(c);
            bn.beta[c] = -0.2 * static_cast<double>(c);
        }
        check_weighted_loss_grads(net, 5, Mode::Eval, rng);
    }
    SUBCASE("sigmoid scalar head over normalized hidden layers") {
        NetworkParams net =
            make_mlp(5, {{7, Activation::Tanh, true}, {6, Activation::Tanh, true}, {1, Activation::Sigmoid, false}},
                     rng);
        check_weighted_loss_grads(net, 4, Mode::Train, rng);
    }
    SUBCASE("identity head over normalized hidden layers") {
        NetworkParams net =
            make_mlp(6, {{8, Activation::Tanh, true}, {8, Activation::Tanh, true}, {3, Activation::Identity, false}},
                     rng);
        check_weighted_loss_grads(net, 4, Mode::Train, rng);
    }
}

TEST_CASE("softmax cross-entropy gradient path matches finite differences") {
    Rng rng(29);
    NetworkParams net =
        make_mlp(5, {{8, Activation::Tanh, false}, {4, Activation::Softmax, false}}, rng);
    DenseMatrix input = random_matrix(6, 5, rng);
    std::vector<int> labels = {0, 3, 1, 2, 2, 0};

    ForwardCache cache;
    DenseMatrix probs = mlp_forward(net, input, Mode::Eval, &cache);
    DenseMatrix zero_grad(probs.rows, probs.cols);
    DenseMatrix extra = ce_softmax_preact_grad(probs, labels);
    Gradients analytic = mlp_backward(net, cache, zero_grad, nullptr, &extra);

    auto loss = [&]() {
        DenseMatrix p = mlp_forward(net, input, Mode::Eval, nullptr);
        return cross_entropy_mean(p, labels);
    };
    const std::vector<double> fd = fd_param_grads(net, loss);
    CHECK(max_rel_err(flatten_gradients(analytic), fd) < 1e-4);
}

TEST_CASE("param_grads=false still produces the exact input gradient") {
    Rng rng(31);
    NetworkParams net =
        make_mlp(4, {{6, Activation::Tanh, true}, {1, Activation::Sigmoid, false}}, rng);
    DenseMatrix input = random_matrix(3, 4, rng);
    DenseMatrix w = random_matrix(3, 1, rng);

    ForwardCache cache;
    mlp_forward(net, input, Mode::Train, &cache);
    DenseMatrix gi_full, gi_lean;
    mlp_backward(net, cache, w, &gi_full);
    Gradients lean = mlp_backward(net, cache, w, &gi_lean, nullptr, false);
    CHECK(lean.layers.empty());
    REQUIRE(gi_full.data.size() == gi_lean.data.size());
    for (std::size_t i = 0; i < gi_full.data.size(); ++i) CHECK(gi_full.data[i] == gi_lean.data[i]);
}

TEST_CASE("forward and backward reject malformed inputs") {
    Rng rng(37);
    NetworkParams net = make_mlp(3, {{2, Activation::Tanh, false}}, rng);
    DenseMatrix bad(2, 4);
    CHECK_THROWS_AS(mlp_forward(net, bad, Mode::Eval), std::invalid_argument);

    ForwardCache stale;
    DenseMatrix g(2, 2);
    CHECK_THROWS_AS(mlp_backward(net, stale, g), std::invalid_argument);

    NetworkParams broken = net;
    broken.layers.push_back(broken.layers[0]);  // 2-wide output into 3-wide input
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("trainable slot order is weight, bias, gamma, beta per layer") {
    Rng rng(41);
    NetworkParams net =
        make_mlp(2, {{2, Activation::Tanh, true}, {1, Activation::Identity, false}}, rng);
    std::vector<double*> slots = trainable_slots(net);
    REQUIRE(slots.size() == trainable_count(net));
    REQUIRE(slots.size() == (2 * 2 + 2 + 2 + 2) + (2 * 1 + 1));
    CHECK(slots[0] == &net.layers[0].weight.data[0]);
    CHECK(slots[4] == &net.layers[0].bias[0]);
    CHECK(slots[6] == &net.layers[0].batchnorm->gamma[0]);
    CHECK(slots[8] == &net.layers[0].batchnorm->beta[0]);
    CHECK(slots[10] == &net.layers[1].weight.data[0]);

    // flatten_gradients mirrors the same ordering.
    Gradients g = make_zero_gradients(net);
    g.layers[0].weight.data[0] = 1.0;
    g.layers[0].bias[0] = 2.0;
    g.layers[0].gamma[0] = 3.0;
    g.layers[0].beta[0] = 4.0;
    g.layers[1].weight.data[0] = 5.0;
    std::vector<double> flat = flatten_gradients(g);
    CHECK(flat[0] == 1.0);
    CHECK(flat[4] == 2.0);
    CHECK(flat[6] == 3.0);
    CHECK(flat[8] == 4.0);
    CHECK(flat[10] == 5.0);
}

TEST_CASE("adam ascent is bitwise descent on the negated gradient") {
    std::vector<double> pa = {1.0, -2.0, 0.5};
    std::vector<double> pb = pa;
    std::vector<double*> sa = {&pa[0], &pa[1], &pa[2]};
    std::vector<double*> sb = {&pb[0], &pb[1], &pb[2]};
    AdamState stata(3), statb(3);
    Rng rng(43);
    for (int step = 0; step < 25; ++step) {
        std::vector<double> g = {rng.normal(), rng.normal(), rng.normal()};
        std::vector<double> ng = {-g[0], -g[1], -g[2]};
        adam_step(stata, sa, g, /*ascend=*/true);
        adam_step(statb, sb, ng, /*ascend=*/false);
        for (int i = 0; i < 3; ++i) CHECK(pa[i] == pb[i]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(stata.m[i] == statb.m[i]);
        CHECK(stata.v[i] == statb.v[i]);
    }
}

TEST_CASE("adam minimizes a separable quadratic") {
    std::vector<double> x = {5.0, -4.0};
    std::vector<double*> slots = {&x[0], &x[1]};
    AdamConfig cfg;
    cfg.alpha = 0.05;
    AdamState state(2, cfg);
    for (int step = 0; step < 2000; ++step) {
        std::vector<double> g = {2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)};
        adam_step(state, slots, g);
    }
    CHECK(x[0] == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("adam first step moves by roughly alpha in the gradient direction") {
    std::vector<double> x = {0.0};
    std::vector<double*> slots = {&x[0]};
    AdamState state(1);
    adam_step(state, slots, {0.7});
    CHECK(x[0] == doctest::Approx(-1e-4).epsilon(1e-3));
}

TEST_CASE("probability clamping bounds logs and zeroes gradients outside the window") {
    CHECK(safe_log(0.0) == doctest::Approx(std::log(1e-12)).epsilon(1e-15));
    CHECK(safe_log(1.0) == doctest::Approx(std::log(1.0 - 1e-12)).epsilon(1e-15));
    CHECK(safe_log(0.8) == doctest::Approx(-0.2231435513142097).epsilon(1e-14));
    CHECK(safe_log1m(0.8) == doctest::Approx(-1.6094379124341003).epsilon(1e-14));
    CHECK(dlog_dp(0.5) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(dlog_dp(0.0) == 0.0);
    CHECK(dlog1m_dp(0.25) == doctest::Approx(-4.0 / 3.0).epsilon(1e-14));
    CHECK(dlog1m_dp(1.0) == 0.0);
}

TEST_CASE("cross entropy of a uniform categorical is log of the class count") {
    DenseMatrix probs(3, 4);
    for (double& v : probs.data) v = 0.25;
    CHECK(cross_entropy_mean(probs, {0, 1, 3}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("zero-weight softmax network emits the uniform distribution") {
    Rng rng(47);
    NetworkParams net =
        make_mlp(6, {{8, Activation::Tanh, false}, {2, Activation::Softmax, false}}, rng);
    for (Layer& layer : net.layers) {
        for (double& v : layer.weight.data) v = 0.0;
        for (double& v : layer.bias) v = 0.0;
    }
    DenseMatrix input = random_matrix(5, 6, rng);
    DenseMatrix out = mlp_forward(net, input, Mode::Eval);
    for (const double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cross_entropy_mean(out, {0, 1, 0, 1, 0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("parameter checksum tracks any stored value") {
    Rng rng(53);
    NetworkParams net = make_mlp(3, {{4, Activation::Tanh, true}}, rng);
    const std::uint64_t base = params_checksum(net);
    CHECK(params_checksum(net) == base);

    NetworkParams tweaked = net;
    tweaked.layers[0].weight.data[5] += 1e-15;
    CHECK(params_checksum(tweaked) != base);

    NetworkParams stats = net;
    stats.layers[0].batchnorm->running_var[1] += 1e-12;
    CHECK(params_checksum(stats) != base);
}
