#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <random>

#include "sickbench/diffcore/tape.hpp"
#include "support/oracles.hpp"

using namespace sickbench::diffcore;
using oracle::finite_difference;
using oracle::max_rel_err;
using oracle::random_array;

namespace {

constexpr double kGradTol = 1e-4;

Array grad_of_input(Tape& tape, Tape::NodeId loss, Tape::NodeId leaf) {
    auto grads = tape.grad(loss, {leaf});
    return grads.at(leaf);
}

}  // namespace

TEST_CASE("softmax of uniform logits is uniform") {
    Tape t;
    auto x = t.input(Array({1, 4}, {0, 0, 0, 0}));
    auto y = t.softmax(x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.value(y).data[i] == doctest::Approx(0.25));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    std::mt19937_64 rng(11);
    for (int it = 0; it < 20; ++it) {
        Array logits = random_array({3, 5}, rng, -8.0, 8.0);
        Tape t;
        auto y = t.softmax(t.input(logits));
        for (std::size_t r = 0; r < 3; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 5; ++c) s += t.value(y).at(r, c);
            CHECK(std::fabs(s - 1.0) < 1e-9);
        }
        Array shifted = logits;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 5; ++c) shifted.at(r, c) += 3.75;
        Tape t2;
        auto y2 = t2.softmax(t2.input(shifted));
        for (std::size_t i = 0; i < 15; ++i)
            CHECK(t.value(y).data[i] == doctest::Approx(t2.value(y2).data[i]).epsilon(1e-12));
    }
}

TEST_CASE("relu forward and gradient mask") {
    Tape t;
    auto x = t.input(Array({2}, {-1.0, 2.0}));
    auto y = t.relu(x);
    CHECK(t.value(y).data[0] == 0.0);
    CHECK(t.value(y).data[1] == 2.0);
    auto loss = t.sum(y);
    Array g = grad_of_input(t, loss, x);
    CHECK(g.data[0] == 0.0);
    CHECK(g.data[1] == 1.0);
}

TEST_CASE("conv1d dilation 2 without padding, hand convolution") {
    Tape t;
    auto x = t.input(Array({1, 5, 1}, {1, 2, 3, 4, 5}));
    auto k = t.input(Array({2, 1, 1}, {1, 1}));
    auto y = t.conv1d_dilated(x, k, std::nullopt, 2, ConvPadding::None);
    REQUIRE(t.value(y).shape == std::vector<std::size_t>{1, 3, 1});
    CHECK(t.value(y).data[0] == 4.0);  // x_t + x_{t+2}
    CHECK(t.value(y).data[1] == 6.0);
    CHECK(t.value(y).data[2] == 8.0);
}

TEST_CASE("causal conv output keeps length and ignores the future") {
    std::mt19937_64 rng(5);
    Array x = random_array({1, 8, 2}, rng);
    Array k = random_array({3, 2, 4}, rng);
    Tape t;
    auto xi = t.input(x);
    auto y = t.conv1d_dilated(xi, t.input(k), std::nullopt, 2, ConvPadding::Causal);
    REQUIRE(t.value(y).shape == std::vector<std::size_t>{1, 8, 4});

    // d(y at time t0)/dx must be zero at every input time > t0.
    const std::size_t t0 = 3;
    Array pick({1, 8, 4});
    for (std::size_t c = 0; c < 4; ++c) pick.at(0, t0, c) = 1.0;
    auto loss = t.inner(y, pick);
    Array g = grad_of_input(t, loss, xi);
    for (std::size_t tt = t0 + 1; tt < 8; ++tt)
        for (std::size_t c = 0; c < 2; ++c) CHECK(g.at(0, tt, c) == 0.0);
}

TEST_CASE("grad of sum is all ones") {
    Tape t;
    auto x = t.input(Array({3}, {4.0, -2.0, 7.0}));
    auto loss = t.sum(x);
    Array g = grad_of_input(t, loss, x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g.data[i] == 1.0);
}

TEST_CASE("dense + cross-entropy matches the closed-form logistic gradient") {
    // loss = CE(softmax(W^T x + b), y); dL/dx = W (p - y) for column conventions,
    // here x [1,2] row vector, W [2,2]: dL/dx = (p - y) W^T.
    Array xv({1, 2}, {0.7, -1.3});
    Array wv({2, 2}, {0.5, -0.2, 0.1, 0.9});
    Array bv({2}, {0.05, -0.1});
    Array y({1, 2}, {1.0, 0.0});

    Tape t;
    auto x = t.input(xv);
    auto logits = t.dense(x, t.input(wv), t.input(bv));
    auto probs = t.softmax(logits);
    auto loss = t.cross_entropy(probs, y);
    Array g = grad_of_input(t, loss, x);

    // Independent route: compute p by hand, then (p - y) W^T.
    const double z0 = xv.data[0] * wv.at(0, 0) + xv.data[1] * wv.at(1, 0) + bv.data[0];
    const double z1 = xv.data[0] * wv.at(0, 1) + xv.data[1] * wv.at(1, 1) + bv.data[1];
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    const double d0 = p0 - 1.0, d1 = p1 - 0.0;
    CHECK(g.data[0] == doctest::Approx(d0 * wv.at(0, 0) + d1 * wv.at(0, 1)).epsilon(1e-10));
    CHECK(g.data[1] == doctest::Approx(d0 * wv.at(1, 0) + d1 * wv.at(1, 1)).epsilon(1e-10));
}

TEST_CASE("every primitive matches central finite differences") {
    std::mt19937_64 rng(123);

    auto check_against_fd = [&](const char* what, const Array& x0,
                                const std::function<Tape::NodeId(Tape&, Tape::NodeId)>& graph,
                                std::uint64_t tape_seed = 0) {
        Array readout;
        {
            Tape probe(tape_seed);
            auto out = graph(probe, probe.input(x0));
            readout = random_array(probe.value(out).shape, rng);
        }
        auto forward = [&](const Array& x) {
            Tape t(tape_seed);
            auto xi = t.input(x);
            auto out = graph(t, xi);
            return t.value(t.inner(out, readout)).data[0];
        };
        Tape t(tape_seed);
        auto xi = t.input(x0);
        auto out = graph(t, xi);
        auto loss = t.inner(out, readout);
        Array analytic = t.grad(loss, {xi}).at(xi);
        Array numeric = finite_difference(forward, x0);
        INFO(what);
        CHECK(max_rel_err(analytic, numeric) < kGradTol);
    };

    for (int round = 0; round < 20; ++round) {
        const std::uint64_t seed = 1000 + round;
        Array w = random_array({3, 4}, rng);
        Array b = random_array({4}, rng);
        check_against_fd("dense", random_array({2, 3}, rng), [&](Tape& t, Tape::NodeId x) {
            return t.dense(x, t.input(w), t.input(b));
        });

        Array k = random_array({3, 2, 3}, rng);
        check_against_fd("conv1d causal", random_array({2, 7, 2}, rng),
                         [&](Tape& t, Tape::NodeId x) {
                             return t.conv1d_dilated(x, t.input(k), std::nullopt, 2,
                                                     ConvPadding::Causal);
                         });
        check_against_fd("conv1d valid", random_array({1, 9, 2}, rng),
                         [&](Tape& t, Tape::NodeId x) {
                             return t.conv1d_dilated(x, t.input(k), std::nullopt, 1,
                                                     ConvPadding::None);
                         });

        check_against_fd("relu", random_array({3, 5}, rng),
                         [&](Tape& t, Tape::NodeId x) { return t.relu(x); });
        check_against_fd("softmax", random_array({2, 4}, rng),
                         [&](Tape& t, Tape::NodeId x) { return t.softmax(x); });

        Array gam = random_array({3}, rng, 0.5, 1.5);
        Array bet = random_array({3}, rng);
        check_against_fd("batch_norm train", random_array({6, 3}, rng),
                         [&](Tape& t, Tape::NodeId x) {
                             RunningStats rs{Array({3}), Array::full({3}, 1.0)};
                             return t.batch_norm(x, t.input(gam), t.input(bet), &rs, Mode::Train);
                         });
        RunningStats frozen{random_array({3}, rng), random_array({3}, rng, 0.5, 2.0)};
        check_against_fd("batch_norm infer", random_array({5, 3}, rng),
                         [&](Tape& t, Tape::NodeId x) {
                             RunningStats rs = frozen;
                             return t.batch_norm(x, t.input(gam), t.input(bet), &rs, Mode::Infer);
                         });
        check_against_fd("layer_norm", random_array({4, 3}, rng), [&](Tape& t, Tape::NodeId x) {
            return t.layer_norm(x, t.input(gam), t.input(bet));
        });

        Array wq = random_array({4, 4}, rng);
        check_against_fd("scaled_dot_attention", random_array({2, 4, 4}, rng),
                         [&](Tape& t, Tape::NodeId x) {
                             auto q = t.dense(x, t.input(wq));
                             return t.scaled_dot_attention(q, x, x, 2);
                         });

        Array other = random_array({2, 3, 2}, rng);
        check_against_fd("residual_add", random_array({2, 3, 2}, rng),
                         [&](Tape& t, Tape::NodeId x) { return t.residual_add(x, t.input(other)); });
        check_against_fd("global_avg_pool", random_array({2, 5, 3}, rng),
                         [&](Tape& t, Tape::NodeId x) { return t.global_avg_pool(x); });
        check_against_fd(
            "dropout train", random_array({4, 6}, rng),
            [&](Tape& t, Tape::NodeId x) { return t.dropout(x, 0.4, Mode::Train); }, seed);
        check_against_fd("sinusoidal_pe", random_array({2, 5, 4}, rng),
                         [&](Tape& t, Tape::NodeId x) { return t.sinusoidal_pe(x); });

        // Scalar losses: compare d/dlogits directly.
        Array target({2, 4});
        target.at(0, round % 4) = 1.0;
        target.at(1, (round + 1) % 4) = 1.0;
        {
            Array x0 = random_array({2, 4}, rng);
            auto forward = [&](const Array& x) {
                Tape t;
                return t.value(t.softmax_cross_entropy(t.input(x), target)).data[0];
            };
            Tape t;
            auto xi = t.input(x0);
            auto loss = t.softmax_cross_entropy(xi, target);
            CHECK(max_rel_err(t.grad(loss, {xi}).at(xi), finite_difference(forward, x0)) <
                  kGradTol);
        }
        {
            Array x0 = random_array({2, 4}, rng, 0.05, 1.0);  // valid prob magnitudes
            auto forward = [&](const Array& x) {
                Tape t;
                return t.value(t.cross_entropy(t.input(x), target)).data[0];
            };
            Tape t;
            auto xi = t.input(x0);
            auto loss = t.cross_entropy(xi, target);
            CHECK(max_rel_err(t.grad(loss, {xi}).at(xi), finite_difference(forward, x0)) <
                  kGradTol);
        }
    }
}

TEST_CASE("infer-mode forward is bit-identical across runs") {
    std::mt19937_64 rng(321);
    Array x = random_array({2, 6, 3}, rng);
    Array k = random_array({3, 3, 4}, rng);
    Array gam = Array::full({4}, 1.0), bet = Array({4});
    RunningStats rs{random_array({4}, rng), random_array({4}, rng, 0.5, 2.0)};

    auto run = [&]() {
        Tape t;
        auto h = t.conv1d_dilated(t.input(x), t.input(k), std::nullopt, 1, ConvPadding::Causal);
        RunningStats local = rs;
        h = t.batch_norm(h, t.input(gam), t.input(bet), &local, Mode::Infer);
        h = t.dropout(t.relu(h), 0.5, Mode::Infer);
        auto pooled = t.global_avg_pool(h);
        return t.value(t.softmax(pooled));
    };
    Array a = run(), b = run();
    REQUIRE(a.numel() == b.numel());
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.numel() * sizeof(double)) == 0);
}

TEST_CASE("dropout is deterministic per tape seed and masks are replayed in backward") {
    std::mt19937_64 rng(77);
    Array x = random_array({3, 8}, rng);
    Tape t1(42), t2(42), t3(43);
    auto o1 = t1.dropout(t1.input(x), 0.5, Mode::Train);
    auto o2 = t2.dropout(t2.input(x), 0.5, Mode::Train);
    auto o3 = t3.dropout(t3.input(x), 0.5, Mode::Train);
    CHECK(t1.value(o1).data == t2.value(o2).data);
    CHECK(t1.value(o1).data != t3.value(o3).data);
}

TEST_CASE("shape errors name the op and the offending dimensions") {
    Tape t;
    auto x = t.input(Array({2, 3}, {1, 2, 3, 4, 5, 6}));
    auto w = t.input(Array({4, 2}, std::vector<double>(8, 0.0)));
    CHECK_THROWS_WITH_AS(t.dense(x, w), doctest::Contains("dense"), std::invalid_argument);
    auto a = t.input(Array({2}, {1, 2}));
    auto b = t.input(Array({3}, {1, 2, 3}));
    CHECK_THROWS_WITH_AS(t.residual_add(a, b), doctest::Contains("residual_add"),
                         std::invalid_argument);
}

TEST_CASE("grad rejects non-scalar losses and unknown leaves") {
    Tape t;
    auto x = t.input(Array({2}, {1, 2}));
    auto y = t.relu(x);
    CHECK_THROWS_AS(t.grad(y, {x}), std::invalid_argument);  // vector-valued
    auto loss = t.sum(y);
    CHECK_THROWS_AS(t.grad(loss, {static_cast<Tape::NodeId>(99)}), std::invalid_argument);
}

TEST_CASE("gradient flows to unreachable leaves as zeros") {
    Tape t;
    auto x = t.input(Array({2}, {1, 2}));
    auto unused = t.input(Array({3}, {5, 6, 7}));
    auto loss = t.sum(t.relu(x));
    auto grads = t.grad(loss, {unused});
    CHECK(grads.at(unused).shape == std::vector<std::size_t>{3});
    for (double v : grads.at(unused).data) CHECK(v == 0.0);
}
