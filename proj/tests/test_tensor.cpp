#include <doctest.h>

#include "modrec/rng.hpp"
#include "modrec/tensor.hpp"
#include "oracles.hpp"

using namespace modrec;

TEST_CASE("tensor_from places values in row-major order") {
    const auto t = Tensorf::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.at(1, 0) == 3);
    CHECK(t.at(0, 1) == 2);

    const auto z = Tensorf::from({3}, {0, 0, 0});
    CHECK(sum(z) == 0);

    CHECK_THROWS_AS(Tensorf::from({2}, {1, 2, 3}), SizeError);
}

TEST_CASE("row-major flat index matches stride arithmetic on random shapes") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        Shape shape;
        const std::size_t rank = 1 + rng.below(4);
        for (std::size_t d = 0; d < rank; ++d) shape.push_back(1 + rng.below(5));
        Tensorf t(shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
        const Shape strides = t.strides();
        for (int probe = 0; probe < 10; ++probe) {
            std::size_t flat = 0;
            Shape idx(rank);
            for (std::size_t d = 0; d < rank; ++d) {
                idx[d] = rng.below(shape[d]);
                flat += idx[d] * strides[d];
            }
            CHECK(t[flat] == static_cast<float>(flat));
        }
    }
}

TEST_CASE("elementwise_add fixtures and commutativity") {
    CHECK(add(Tensorf::from({2}, {1, 2}), Tensorf::from({2}, {0, 0})) ==
          Tensorf::from({2}, {1, 2}));
    CHECK(add(Tensorf::from({2}, {1, -1}), Tensorf::from({2}, {-1, 1})) ==
          Tensorf::from({2}, {0, 0}));
    CHECK_THROWS_AS(add(Tensorf({2}), Tensorf({3})), ShapeError);

    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = uniform_tensor<float>(rng, {8}, -10, 10);
        const auto b = uniform_tensor<float>(rng, {8}, -10, 10);
        CHECK(add(a, b) == add(b, a));  // bit-exact for IEEE addition
    }
}

TEST_CASE("matmul fixtures") {
    const auto eye = Tensorf::from({2, 2}, {1, 0, 0, 1});
    const auto m = Tensorf::from({2, 2}, {5, 6, 7, 8});
    CHECK(matmul(eye, m) == m);

    const auto row = Tensorf::from({1, 2}, {1, 2});
    const auto col = Tensorf::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).at(0, 0) == 11.0f);

    CHECK_THROWS_AS(matmul(Tensorf({2, 3}), Tensorf({2, 3})), ShapeError);
}

TEST_CASE("matmul agrees with the naive triple loop on random small matrices") {
    Rng rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
        const auto a = uniform_tensor<float>(rng, {m, k}, -2, 2);
        const auto b = uniform_tensor<float>(rng, {k, n}, -2, 2);
        const auto got = matmul(a, b);
        const auto want = oracle::naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got[i] - want[i]) <= 1e-5);
        }
    }
}

TEST_CASE("concat_channels stacks blocks in argument order") {
    const auto a = Tensorf::from({1, 2, 2}, {1, 2, 3, 4});
    const auto b = Tensorf::from({1, 2, 2}, {5, 6, 7, 8});
    const auto c = concat_channels({a, b});
    CHECK(c.shape() == Shape{2, 2, 2});
    CHECK(c.at(0, 1, 1) == 4);
    CHECK(c.at(1, 0, 0) == 5);

    CHECK(concat_channels({a}) == a);
    CHECK_THROWS_AS(concat_channels({a, Tensorf({1, 1, 2})}), ShapeError);
}

TEST_CASE("rng: same seed same stream, splits independent") {
    Rng a(99), b(99);
    for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());

    const Rng base(5);
    Rng s1 = base.split(7), s2 = base.split(7);
    for (int i = 0; i < 64; ++i) CHECK(s1.next_u64() == s2.next_u64());

    Rng d0 = base.split(0), d1 = base.split(1);
    bool differs = false;
    for (int i = 0; i < 64; ++i) differs = differs || (d0.next_u64() != d1.next_u64());
    CHECK(differs);

    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("rng split after consumption equals split before") {
    Rng fresh(11);
    Rng consumed(11);
    for (int i = 0; i < 10; ++i) consumed.next_u64();
    Rng a = fresh.split(3), b = consumed.split(3);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("random tensors are byte-identical for the same seed") {
    Rng a(2024), b(2024);
    const auto ta = uniform_tensor<float>(a, {4, 5}, -1, 1);
    const auto tb = uniform_tensor<float>(b, {4, 5}, -1, 1);
    CHECK(content_hash(ta) == content_hash(tb));
    CHECK(ta == tb);
}
