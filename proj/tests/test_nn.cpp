#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

using namespace dunmri;
using namespace testutil;
namespace op = dunmri::ops;

namespace {

// scalar-loop reference for padded cross-correlation
std::vector<double> conv_ref(const Tensor& x, const Tensor& w, const Tensor* b, int pad) {
    int cin = x.shape()[0], h = x.shape()[1], ww = x.shape()[2];
    int cout = w.shape()[0], k = w.shape()[2];
    int oh = h + 2 * pad - k + 1, ow = ww + 2 * pad - k + 1;
    std::vector<double> out(static_cast<size_t>(cout) * oh * ow, 0.0);
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b ? b->buffer()[co] : 0.0;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int iy = oy + ky - pad, ix = ox + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= ww) continue;
                            acc += x.buffer()[(static_cast<size_t>(ci) * h + iy) * ww + ix] *
                                   w.buffer()[((static_cast<size_t>(co) * cin + ci) * k + ky) * k +
                                              kx];
                        }
                out[(static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d forward matches the scalar reference") {
    std::mt19937_64 rng(201);
    Tensor x = random_tensor({2, 5, 6}, Dtype::Real, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, Dtype::Real, rng);
    Tensor b = random_tensor({3}, Dtype::Real, rng);
    for (int pad : {0, 1, 2}) {
        Tensor y = op::conv2d(x, w, b, pad);
        CHECK(y.shape() == std::vector<int>{3, 5 + 2 * pad - 2, 6 + 2 * pad - 2});
        CHECK(max_abs_diff(y.buffer(), conv_ref(x, w, &b, pad)) < 1e-14);
    }
    Tensor y0 = op::conv2d(x, w, std::nullopt, 1);
    CHECK(max_abs_diff(y0.buffer(), conv_ref(x, w, nullptr, 1)) < 1e-14);
    // 1x1 identity kernel passes channels through
    Tensor id = Tensor::from_buffer({2, 2, 1, 1}, Dtype::Real, {1.0, 0.0, 0.0, 1.0});
    CHECK(max_abs_diff(op::conv2d(x, id, std::nullopt, 0), x) == 0.0);
}

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 rng(203);
    Tensor xv = random_tensor({2, 4, 4}, Dtype::Real, rng);
    Tensor wv = random_tensor({2, 2, 3, 3}, Dtype::Real, rng);
    Tensor bv = random_tensor({2}, Dtype::Real, rng);
    Tape tape;
    Tensor x = tape.leaf(xv), w = tape.leaf(wv), b = tape.leaf(bv);
    Tensor y = op::conv2d(x, w, b, 1);
    tape.backward(op::mean(op::mul(y, y)));
    auto loss_with = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
        Tensor yy = op::conv2d(xx, ww, bb, 1);
        return op::mean(op::mul(yy, yy)).scalar_value();
    };
    auto gx = tape.grad_or_zero(x);
    for (size_t i = 0; i < xv.buffer_size(); i += 3)
        CHECK(gx[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& t) { return loss_with(t, wv, bv); }, xv, i))
                           .epsilon(1e-5));
    auto gw = tape.grad_or_zero(w);
    for (size_t i = 0; i < wv.buffer_size(); i += 5)
        CHECK(gw[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& t) { return loss_with(xv, t, bv); }, wv, i))
                           .epsilon(1e-5));
    auto gb = tape.grad_or_zero(b);
    for (size_t i = 0; i < 2; ++i)
        CHECK(gb[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& t) { return loss_with(xv, wv, t); }, bv, i))
                           .epsilon(1e-5));
}

TEST_CASE("leaky_relu") {
    Tensor x = Tensor::from_buffer({4}, Dtype::Real, {2.0, -2.0, 0.5, -0.25});
    Tensor y = op::leaky_relu(x, 0.5);
    CHECK(y.buffer() == std::vector<double>{2.0, -1.0, 0.5, -0.125});
    auto g = tape_grad(
        [](Tape&, const Tensor& xl) { return op::sum(op::leaky_relu(xl, 0.5)); }, x);
    CHECK(g == std::vector<double>{1.0, 0.5, 1.0, 0.5});
}

TEST_CASE("instance_norm normalizes per channel") {
    std::mt19937_64 rng(207);
    Tensor x = random_tensor({3, 4, 4}, Dtype::Real, rng, -2.0, 5.0);
    Tensor ones = Tensor::full({3}, 1.0);
    Tensor zero = Tensor::zeros({3});
    Tensor y = op::instance_norm(x, ones, zero, 1e-5);
    for (int c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (int i = 0; i < 16; ++i) m += y.buffer()[c * 16 + i];
        m /= 16.0;
        for (int i = 0; i < 16; ++i) {
            double d = y.buffer()[c * 16 + i] - m;
            v += d * d;
        }
        v /= 16.0;
        CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts variance slightly
    }
}

TEST_CASE("instance_norm gradients match finite differences") {
    std::mt19937_64 rng(209);
    Tensor xv = random_tensor({2, 3, 3}, Dtype::Real, rng);
    Tensor gv = random_tensor({2}, Dtype::Real, rng, 0.5, 1.5);
    Tensor bv = random_tensor({2}, Dtype::Real, rng);
    Tensor tv = random_tensor({2, 3, 3}, Dtype::Real, rng);  // fixed projection
    auto loss_with = [&](const Tensor& xx, const Tensor& gg, const Tensor& bb) {
        Tensor y = op::instance_norm(xx, gg, bb, 1e-5);
        double acc = 0.0;
        for (size_t i = 0; i < y.buffer_size(); ++i)
            acc += y.buffer()[i] * tv.buffer()[i] + 0.1 * y.buffer()[i] * y.buffer()[i];
        return acc;
    };
    Tape tape;
    Tensor x = tape.leaf(xv), g = tape.leaf(gv), b = tape.leaf(bv), t = tape.leaf(tv);
    Tensor y = op::instance_norm(x, g, b, 1e-5);
    Tensor loss = op::add(op::sum(op::mul(y, t)), op::scale(op::sum(op::mul(y, y)), 0.1));
    tape.backward(loss);
    auto gx = tape.grad_or_zero(x);
    for (size_t i = 0; i < xv.buffer_size(); i += 2)
        CHECK(gx[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(p, gv, bv); }, xv, i, 1e-5))
                           .epsilon(2e-5));
    auto gg = tape.grad_or_zero(g);
    auto gb = tape.grad_or_zero(b);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(gg[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(xv, p, bv); }, gv, i, 1e-5))
                           .epsilon(2e-5));
        CHECK(gb[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(xv, gv, p); }, bv, i, 1e-5))
                           .epsilon(2e-5));
    }
}

TEST_CASE("avg_pool2") {
    Tensor x = Tensor::from_buffer({1, 2, 4}, Dtype::Real,
                                   {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0});
    Tensor y = op::avg_pool2(x);
    CHECK(y.shape() == std::vector<int>{1, 1, 2});
    CHECK(y.buffer() == std::vector<double>{3.5, 5.5});
    auto g = tape_grad([](Tape&, const Tensor& xl) { return op::sum(op::avg_pool2(xl)); }, x);
    for (double v : g) CHECK(v == 0.25);
    CHECK_THROWS_AS(op::avg_pool2(Tensor::zeros({1, 3, 4})), std::invalid_argument);
}

TEST_CASE("transpose_conv_up2 doubles resolution") {
    std::mt19937_64 rng(211);
    Tensor xv = random_tensor({2, 3, 3}, Dtype::Real, rng);
    Tensor wv = random_tensor({2, 3, 2, 2}, Dtype::Real, rng);
    Tensor bv = random_tensor({3}, Dtype::Real, rng);
    Tensor y = op::transpose_conv_up2(xv, wv, bv);
    CHECK(y.shape() == std::vector<int>{3, 6, 6});
    // block (2iy+ky, 2ix+kx) holds sum over cin of x*w + bias
    for (int co = 0; co < 3; ++co)
        for (int iy = 0; iy < 3; ++iy)
            for (int ix = 0; ix < 3; ++ix)
                for (int ky = 0; ky < 2; ++ky)
                    for (int kx = 0; kx < 2; ++kx) {
                        double want = bv.buffer()[co];
                        for (int ci = 0; ci < 2; ++ci)
                            want += xv.buffer()[(ci * 3 + iy) * 3 + ix] *
                                    wv.buffer()[((ci * 3 + co) * 2 + ky) * 2 + kx];
                        CHECK(y.buffer()[(co * 6 + 2 * iy + ky) * 6 + 2 * ix + kx] ==
                              doctest::Approx(want).epsilon(1e-13));
                    }
    auto loss_with = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
        Tensor yy = op::transpose_conv_up2(xx, ww, bb);
        return op::mean(op::mul(yy, yy)).scalar_value();
    };
    Tape tape;
    Tensor x = tape.leaf(xv), w = tape.leaf(wv), b = tape.leaf(bv);
    Tensor yy = op::transpose_conv_up2(x, w, b);
    tape.backward(op::mean(op::mul(yy, yy)));
    auto gx = tape.grad_or_zero(x);
    for (size_t i = 0; i < xv.buffer_size(); i += 3)
        CHECK(gx[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(p, wv, bv); }, xv, i))
                           .epsilon(1e-5));
    auto gw = tape.grad_or_zero(w);
    for (size_t i = 0; i < wv.buffer_size(); i += 5)
        CHECK(gw[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(xv, p, bv); }, wv, i))
                           .epsilon(1e-5));
    auto gb = tape.grad_or_zero(b);
    for (size_t i = 0; i < 3; ++i)
        CHECK(gb[i] == doctest::Approx(fd_partial(
                           [&](const Tensor& p) { return loss_with(xv, wv, p); }, bv, i))
                           .epsilon(1e-5));
}

TEST_CASE("nn op validation") {
    CHECK_THROWS_AS(op::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({3, 1, 3, 3}),
                               std::nullopt, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(op::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({3, 2, 3, 3}),
                               std::nullopt, -1),
                    std::invalid_argument);
    CHECK_THROWS_AS(op::instance_norm(Tensor::zeros({2, 4, 4}), Tensor::zeros({3}),
                                      Tensor::zeros({2}), 1e-5),
                    std::invalid_argument);
    CHECK_THROWS_AS(op::transpose_conv_up2(Tensor::zeros({2, 4, 4}),
                                           Tensor::zeros({3, 2, 2, 2}), std::nullopt),
                    std::invalid_argument);
}
