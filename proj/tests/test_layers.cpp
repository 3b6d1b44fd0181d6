#include <doctest.h>

#include "modrec/layers.hpp"
#include "oracles.hpp"

using namespace modrec;

TEST_CASE("conv2d fixture: 1x3 edge filter, valid padding") {
    ConvParams<float> p{Tensorf::from({1, 1, 1, 3}, {1, 0, -1}), Tensorf::zeros({1}), Pad::Valid,
                        Pad::Valid};
    const auto y = conv2d(Tensorf::from({1, 1, 3}, {1, 2, 3}), p);
    CHECK(y.shape() == Shape{1, 1, 1});
    CHECK(y[0] == -2.0f);
}

TEST_CASE("conv2d shape arithmetic matches the CNN2 geometry") {
    Rng rng(9);
    const auto frame = uniform_tensor<float>(rng, {1, 2, 128}, -1, 1);
    auto p1 = init_conv<float>(256, 1, 1, 3, Pad::Valid, Pad::Same, rng);
    const auto a1 = conv2d(frame, p1);
    CHECK(a1.shape() == Shape{256, 2, 128});

    auto p2 = init_conv<float>(80, 256, 2, 3, Pad::Valid, Pad::Same, rng);
    const auto a2 = conv2d(a1, p2);
    CHECK(a2.shape() == Shape{80, 1, 128});

    ConvParams<float> tall{Tensorf::zeros({1, 80, 2, 3}), Tensorf::zeros({1}), Pad::Valid,
                           Pad::Valid};
    CHECK_THROWS_AS(conv2d(a2, tall), ShapeError);  // filter taller than input
}

TEST_CASE("conv2d equals direct summation on random small cases") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t in_c = 1 + rng.below(4), out_c = 1 + rng.below(4);
        const std::size_t h = 1 + rng.below(2);
        const std::size_t fh = 1 + rng.below(h);  // fh <= h
        const std::size_t w = 3 + rng.below(6), fw = 1 + rng.below(3);
        const Pad pad_h = rng.below(2) ? Pad::Same : Pad::Valid;
        const Pad pad_w = rng.below(2) ? Pad::Same : Pad::Valid;
        const auto x = uniform_tensor<float>(rng, {in_c, h, w}, -2, 2);
        const auto weights = uniform_tensor<float>(rng, {out_c, in_c, fh, fw}, -1, 1);
        const auto bias = uniform_tensor<float>(rng, {out_c}, -1, 1);
        ConvParams<float> p{weights, bias, pad_h, pad_w};
        const auto got = conv2d(x, p);
        const auto want = oracle::naive_conv2d(x, weights, bias, pad_h, pad_w);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-6f);
    }
}

TEST_CASE("dense fixtures") {
    DenseParams<float> eye{Tensorf::from({2, 2}, {1, 0, 0, 1}), Tensorf::zeros({2})};
    CHECK(dense(Tensorf::from({2}, {3, 4}), eye) == Tensorf::from({2}, {3, 4}));

    DenseParams<float> sum1{Tensorf::from({2, 1}, {1, 1}), Tensorf::from({1}, {1})};
    CHECK(dense(Tensorf::from({2}, {2, 3}), sum1)[0] == 6.0f);

    CHECK_THROWS_AS(dense(Tensorf::from({3}, {1, 2, 3}), eye), ShapeError);
}

TEST_CASE("activation: relu and softmax") {
    CHECK(activation(Tensorf::from({2}, {-1, 2}), Activation::Relu) == Tensorf::from({2}, {0, 2}));
    const auto p = activation(Tensorf::from({2}, {0, 0}), Activation::Softmax);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("dropout semantics") {
    Rng rng(4);
    const auto x = uniform_tensor<float>(rng, {32}, -1, 1);
    Rng r1(10);
    CHECK(dropout(x, 0.6, Mode::Eval, r1) == x);
    CHECK(dropout(x, 0.0, Mode::Train, r1) == x);
    CHECK_THROWS_AS(dropout(x, 1.0, Mode::Train, r1), ConfigError);
    CHECK_THROWS_AS(dropout(x, -0.1, Mode::Train, r1), ConfigError);

    // survivors of rate 0.6 are scaled by exactly 1/(1-0.6) = 2.5
    Rng r2(11);
    const auto d = dropout(Tensorf::full({256}, 1.0f), 0.6, Mode::Train, r2);
    bool saw_survivor = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK((d[i] == 0.0f || d[i] == 2.5f));
        saw_survivor = saw_survivor || d[i] == 2.5f;
    }
    CHECK(saw_survivor);
}

TEST_CASE("dropout preserves expectation over many draws") {
    Rng rng(2718);
    const std::size_t n = 100000;
    const auto ones = Tensorf::full({n}, 1.0f);
    const auto d = dropout(ones, 0.6, Mode::Train, rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += d[i];
    mean /= static_cast<double>(n);
    CHECK(mean >= 0.99);
    CHECK(mean <= 1.01);
}

TEST_CASE("lstm with all-zero parameters returns exactly zero") {
    const std::size_t u = 4, f = 3;
    LstmParams<float> p{Tensorf::zeros({4 * u, f}), Tensorf::zeros({4 * u, u}),
                        Tensorf::zeros({4 * u})};
    Rng rng(12);
    const auto seq = uniform_tensor<float>(rng, {5, f}, -3, 3);
    const auto h = lstm(seq, p);
    for (std::size_t i = 0; i < u; ++i) CHECK(h[i] == 0.0f);
}

TEST_CASE("lstm single step matches the hand-written cell") {
    Rng rng(13);
    const std::size_t u = 5, f = 3;
    auto p = init_lstm<double>(u, f, rng);
    const auto seq = uniform_tensor<double>(rng, {1, f}, -1, 1);

    std::vector<double> x(f), h(u, 0.0), c(u, 0.0);
    for (std::size_t j = 0; j < f; ++j) x[j] = seq.at(0, j);
    oracle::lstm_step(x, h, c, p.w_input, p.w_recurrent, p.bias);

    const auto got = lstm(seq, p);
    for (std::size_t j = 0; j < u; ++j) CHECK(std::abs(got[j] - h[j]) <= 1e-6);
}

TEST_CASE("lstm multi-step matches the iterated hand cell") {
    Rng rng(14);
    const std::size_t u = 4, f = 2, steps = 6;
    auto p = init_lstm<double>(u, f, rng);
    const auto seq = uniform_tensor<double>(rng, {steps, f}, -1, 1);

    std::vector<double> h(u, 0.0), c(u, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> x(f);
        for (std::size_t j = 0; j < f; ++j) x[j] = seq.at(t, j);
        oracle::lstm_step(x, h, c, p.w_input, p.w_recurrent, p.bias);
    }
    const auto got = lstm(seq, p);
    for (std::size_t j = 0; j < u; ++j) CHECK(std::abs(got[j] - h[j]) <= 1e-6);
}

TEST_CASE("lstm with zero weights depends only on the gate biases") {
    const std::size_t u = 3;
    LstmParams<double> p{Tensord::zeros({4 * u, 2}), Tensord::zeros({4 * u, u}),
                         Tensord::zeros({4 * u})};
    // candidate bias 0.7, other gates stay at sigmoid(0) = 0.5
    for (std::size_t j = 0; j < u; ++j) p.bias[2 * u + j] = 0.7;
    const std::size_t steps = 4;
    const auto seq = Tensord::zeros({steps, 2});

    // closed form per step: c <- 0.5 c + 0.5 tanh(0.7); h = 0.5 tanh(c)
    double c = 0.0;
    for (std::size_t t = 0; t < steps; ++t) c = 0.5 * c + 0.5 * std::tanh(0.7);
    const double want_h = 0.5 * std::tanh(c);

    const auto got = lstm(seq, p);
    for (std::size_t j = 0; j < u; ++j) CHECK(got[j] == doctest::Approx(want_h).epsilon(1e-12));
}

TEST_CASE("lstm rejects feature mismatch") {
    Rng rng(15);
    auto p = init_lstm<float>(4, 3, rng);
    CHECK_THROWS_AS(lstm(uniform_tensor<float>(rng, {2, 5}, -1, 1), p), ShapeError);
}

TEST_CASE("layer gradient checks in double stay under 1e-4") {
    // dense + softmax + cross-entropy on a random 4-dim input
    Rng rng(20);
    const Tensord x0 = uniform_tensor<double>(rng, {4}, -1, 1);
    Tensord w0 = uniform_tensor<double>(rng, {4, 3}, -1, 1);
    const Tensord b0 = uniform_tensor<double>(rng, {3}, -0.3, 0.3);
    Tape<double> tape;
    auto w = tape.leaf(w0);
    auto probs = tape.softmax(tape.add(tape.vecmat(tape.leaf(x0), w), tape.leaf(b0)));
    tape.backward(tape.cross_entropy(probs, 1));
    auto f = [&](const Tensord& t) {
        Tape<double> t2;
        auto p2 = t2.softmax(t2.add(t2.vecmat(t2.leaf(x0), t2.leaf(t)), t2.leaf(b0)));
        return static_cast<double>(t2.value(t2.cross_entropy(p2, 1))[0]);
    };
    CHECK(gradient_check<double>(f, w0, tape.grad(w), 1e-5) < 1e-6);
}
