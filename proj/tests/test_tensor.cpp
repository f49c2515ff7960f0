#include <doctest.h>

#include <cmath>

#include "annsnn/errors.hpp"
#include "annsnn/rng.hpp"
#include "annsnn/tensor.hpp"

using namespace annsnn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    Tensor t(std::move(shape));
    for (double& v : t.values()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

// Plain triple loop.
Tensor naive_matmul(const Tensor& a, const Tensor& b)
{
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                s += a.at(i, p) * b.at(p, j);
            }
            c.at(i, j) = s;
        }
    }
    return c;
}

Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t pad)
{
    const std::size_t ci = x.extent(0), h = x.extent(1), wd = x.extent(2);
    const std::size_t co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor y({co, oh, ow});
    for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < ci; ++i) {
                    for (std::size_t u = 0; u < kh; ++u) {
                        for (std::size_t v = 0; v < kw; ++v) {
                            const long rr = static_cast<long>(r * stride + u) - static_cast<long>(pad);
                            const long cc = static_cast<long>(c * stride + v) - static_cast<long>(pad);
                            if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(wd)) {
                                continue;
                            }
                            s += x.at(i, rr, cc) * w.at(o, i, u, v);
                        }
                    }
                }
                y.at(o, r, c) = s + bias[o];
            }
        }
    }
    return y;
}

}  // namespace

TEST_CASE("tensor shape and row-major indexing")
{
    Tensor t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.rank() == 3);
    t.at(1, 2, 3) = 7.0;
    CHECK(t[1 * 12 + 2 * 4 + 3] == 7.0);
    CHECK_THROWS_AS(t.at(2, 0, 0), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
    CHECK_THROWS_AS(t.reshaped({5, 5}), DimensionError);
    CHECK(t.reshaped({4, 6}).at(3, 5) == 7.0);
}

TEST_CASE("matmul small cases")
{
    const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
    const Tensor b = Tensor::matrix({{3, 4}, {5, 6}});
    CHECK(matmul(id, b) == b);
    CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})) == Tensor::matrix({{11}}));
}

TEST_CASE("matmul matches triple loop")
{
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor a = random_tensor({3, 3}, rng);
        const Tensor b = random_tensor({3, 3}, rng);
        CHECK(matmul(a, b) == naive_matmul(a, b));
    }
    const Tensor a = random_tensor({4, 7}, rng);
    const Tensor b = random_tensor({7, 2}, rng);
    CHECK(matmul(a, b) == naive_matmul(a, b));
}

TEST_CASE("matmul shape mismatch names both shapes")
{
    try {
        matmul(Tensor({2, 3}), Tensor({4, 2}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,2]") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(Tensor({2}), Tensor({2, 2})), DimensionError);
}

TEST_CASE("matmul is linear")
{
    Rng rng(5);
    const Tensor a = random_tensor({4, 5}, rng);
    const Tensor b = random_tensor({5, 3}, rng);
    const Tensor c = random_tensor({5, 3}, rng);
    const double alpha = 0.37, beta = -1.4;
    Tensor mix({5, 3});
    for (std::size_t i = 0; i < mix.size(); ++i) {
        mix[i] = alpha * b[i] + beta * c[i];
    }
    const Tensor lhs = matmul(a, mix);
    const Tensor ab = matmul(a, b), ac = matmul(a, c);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(std::abs(lhs[i] - (alpha * ab[i] + beta * ac[i])) <= 1e-12);
    }
}

TEST_CASE("conv2d hand cases")
{
    const Tensor ones({1, 3, 3}, 1.0);
    const Tensor k({1, 1, 3, 3}, 1.0);
    const Tensor y = conv2d(ones, k, Tensor({1}, 0.0), 1, 0);
    CHECK(y.shape() == Shape{1, 1, 1});
    CHECK(y[0] == 9.0);

    Rng rng(3);
    const Tensor x = random_tensor({2, 6, 6}, rng);
    const Tensor zero_k({3, 2, 3, 3}, 0.0);
    const Tensor bias = Tensor::vector({0.5, -1.0, 2.0});
    const Tensor out = conv2d(x, zero_k, bias, 1, 1);
    for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t r = 0; r < 6; ++r) {
            for (std::size_t c = 0; c < 6; ++c) {
                CHECK(out.at(o, r, c) == bias[o]);
            }
        }
    }
}

TEST_CASE("conv2d matches six-loop oracle")
{
    Rng rng(21);
    const Tensor x = random_tensor({2, 5, 5}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    CHECK(conv2d(x, w, b, 1, 0) == naive_conv(x, w, b, 1, 0));
    CHECK(conv2d(x, w, b, 1, 1) == naive_conv(x, w, b, 1, 1));
    CHECK(conv2d(x, w, b, 2, 0) == naive_conv(x, w, b, 2, 0));
}

TEST_CASE("conv2d with 1x1 kernel is a per-pixel matmul")
{
    Rng rng(8);
    const Tensor x = random_tensor({3, 4, 4}, rng);
    const Tensor w = random_tensor({2, 3, 1, 1}, rng);
    const Tensor y = conv2d(x, w, Tensor({2}, 0.0), 1, 0);
    const Tensor wm = w.reshaped({2, 3});
    const Tensor xm = x.reshaped({3, 16});
    CHECK(y.reshaped({2, 16}) == matmul(wm, xm));
}

TEST_CASE("conv2d rejects non-integral output")
{
    CHECK_THROWS_AS(conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({1}), 2, 0), ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), Tensor({1}), 1, 0), ConfigError);
    CHECK_THROWS_AS(conv2d(Tensor({2, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({1}), 1, 0), DimensionError);
}

TEST_CASE("avgpool2d")
{
    CHECK(avgpool2d(Tensor({1, 2, 2}, 1.0), 2)[0] == 1.0);
    CHECK(avgpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2)[0] == 2.5);
    CHECK_THROWS_AS(avgpool2d(Tensor({1, 3, 4}), 2), ConfigError);

    Rng rng(4);
    const Tensor x = random_tensor({1, 4, 4}, rng);
    const Tensor y = avgpool2d(x, 2);
    REQUIRE(y.shape() == Shape{1, 2, 2});
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            double s = 0.0;
            for (std::size_t u = 0; u < 2; ++u) {
                for (std::size_t v = 0; v < 2; ++v) {
                    s += x.at(0, 2 * r + u, 2 * c + v);
                }
            }
            CHECK(y.at(0, r, c) == doctest::Approx(s / 4.0).epsilon(1e-15));
        }
    }
}

TEST_CASE("operations are deterministic")
{
    Rng rng(99);
    const Tensor x = random_tensor({2, 8, 8}, rng);
    const Tensor w = random_tensor({4, 2, 3, 3}, rng);
    const Tensor b = random_tensor({4}, rng);
    CHECK(conv2d(x, w, b, 1, 1) == conv2d(x, w, b, 1, 1));
    CHECK(flatten(x).shape() == Shape{128});
}

TEST_CASE("rng reproducibility")
{
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    // First output of the reference 64-bit Mersenne Twister for seed 5489.
    CHECK(Rng(5489).next_u64() == 14514284786278117030ULL);
    Rng c(1);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(c.below(7) < 7);
    }
    CHECK(Rng(3).split(1).next_u64() == Rng(3).split(1).next_u64());
    CHECK(Rng(3).split(1).next_u64() != Rng(3).split(2).next_u64());
}
