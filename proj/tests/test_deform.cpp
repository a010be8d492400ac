#include <doctest.h>

#include <random>

#include "tgaf/deform.hpp"
#include "tgaf/gradcheck.hpp"

using namespace tgaf;

namespace {

template <typename T>
DeformKernel<T> random_kernel(int cin, int cout, int k, int groups, std::mt19937_64& rng,
                              bool requires_grad = true) {
    DeformKernel<T> kern;
    kern.weight = random_tensor<T>({cout, cin, k, k}, rng, requires_grad);
    kern.bias = random_tensor<T>({1, cout, 1, 1}, rng, requires_grad);
    kern.deform_groups = groups;
    return kern;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0;
    for (size_t i = 0; i < a.data().size(); ++i)
        worst = std::max(worst, std::abs(double(a.data()[i]) - double(b.data()[i])));
    return worst;
}

}  // namespace

TEST_CASE("offset channel arithmetic") {
    CHECK(offset_channels(3, 1) == 6);
    CHECK(offset_channels(3, 3) == 54);
    CHECK(offset_channels(3, 5) == 150);
    CHECK(offset_channels(64, 1) == 128);
}

TEST_CASE("dcn with zero offsets equals plain convolution") {
    std::mt19937_64 rng(17);
    for (int k : {1, 3, 5}) {
        CAPTURE(k);
        auto x = random_tensor<float>({1, 3, 8, 8}, rng, false);
        auto kern = random_kernel<float>(3, 4, k, 3, rng, false);
        auto offsets = Tensor<float>({1, offset_channels(3, k), 8, 8});
        auto deform = dcn_forward(x, offsets, kern);
        auto plain = conv2d(x, kern.weight, kern.bias, 1, (k - 1) / 2);
        CHECK(max_abs_diff(deform, plain) < 1e-5);
    }
    // per-channel-group configuration (K=1, one group per channel)
    auto x = random_tensor<float>({1, 6, 6, 6}, rng, false);
    auto kern = random_kernel<float>(6, 6, 1, 6, rng, false);
    auto offsets = Tensor<float>({1, 12, 6, 6});
    auto deform = dcn_forward(x, offsets, kern);
    auto plain = conv2d(x, kern.weight, kern.bias, 1, 0);
    CHECK(max_abs_diff(deform, plain) < 1e-5);
}

TEST_CASE("constant integer offset equals shifted-input convolution on interior") {
    std::mt19937_64 rng(23);
    const int h = 7, w = 7, k = 1;
    auto x = random_tensor<float>({1, 2, h, w}, rng, false);
    auto kern = random_kernel<float>(2, 3, k, 1, rng, false);
    // (dy,dx) = (0,1) everywhere: sample one column to the right
    auto offsets = Tensor<float>({1, 2, h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) offsets.at(0, 1, y, xx) = 1.f;
    auto deform = dcn_forward(x, offsets, kern);

    // brute-force oracle: shift the input left by one column, then convolve
    auto shifted = Tensor<float>({1, 2, h, w});
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx + 1 < w; ++xx) shifted.at(0, c, y, xx) = x.at(0, c, y, xx + 1);
    auto plain = conv2d(shifted, kern.weight, kern.bias, 1, 0);
    for (int co = 0; co < 3; ++co)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx + 1 < w; ++xx)
                CHECK(std::abs(deform.at(0, co, y, xx) - plain.at(0, co, y, xx)) < 1e-5);
}

TEST_CASE("dcn is linear in its input once bias is removed") {
    std::mt19937_64 rng(29);
    auto x1 = random_tensor<float>({1, 3, 6, 6}, rng, false);
    auto x2 = random_tensor<float>({1, 3, 6, 6}, rng, false);
    auto kern = random_kernel<float>(3, 2, 3, 3, rng, false);
    kern.bias = Tensor<float>({1, 2, 1, 1});
    auto offsets = random_tensor<float>({1, offset_channels(3, 3), 6, 6}, rng, false);
    for (auto& v : offsets.data()) v *= 0.8f;

    const float a = 1.7f, b = -0.6f;
    Tensor<float> mix({1, 3, 6, 6});
    for (size_t i = 0; i < mix.data().size(); ++i)
        mix.data()[i] = a * x1.data()[i] + b * x2.data()[i];
    auto lhs = dcn_forward(mix, offsets, kern);
    auto y1 = dcn_forward(x1, offsets, kern);
    auto y2 = dcn_forward(x2, offsets, kern);
    for (size_t i = 0; i < lhs.data().size(); ++i)
        CHECK(std::abs(lhs.data()[i] - (a * y1.data()[i] + b * y2.data()[i])) < 1e-5);
}

TEST_CASE("dcn zero upstream gradient produces zero gradients") {
    std::mt19937_64 rng(31);
    auto x = random_tensor<double>({1, 3, 5, 5}, rng);
    auto kern = random_kernel<double>(3, 2, 3, 3, rng);
    auto offsets = random_tensor<double>({1, offset_channels(3, 3), 5, 5}, rng);
    auto out = dcn_forward(x, offsets, kern);
    auto loss = sum_all(scale(out, 0.0));
    backward(loss);
    for (double g : x.grad()) CHECK(g == 0.0);
    for (double g : offsets.grad()) CHECK(g == 0.0);
}

TEST_CASE("dcn gradients match finite differences for all four inputs") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 3; ++trial) {
        CAPTURE(trial);
        auto x = random_tensor<double>({1, 3, 5, 5}, rng);
        auto kern = random_kernel<double>(3, 2, 3, 3, rng);
        auto offsets = random_tensor<double>({1, offset_channels(3, 3), 5, 5}, rng);
        for (auto& v : offsets.data()) v *= 0.7;
        auto build = [&] {
            return weighted_sum(dcn_forward(x, offsets, kern), 61 + trial);
        };
        CHECK(gradcheck_max_err<double>(build, {x, offsets, kern.weight, kern.bias}) < 1e-4);
    }
}

TEST_CASE("offset gradient at integer landings equals the neighbor difference") {
    // K=1, single channel, offset lands exactly on an integer position:
    // d(sample)/dy is the discrete difference of vertical neighbors.
    auto x = Tensor<double>::from_data({1, 1, 3, 3}, {0, 1, 2, 10, 11, 12, 30, 31, 32});
    DeformKernel<double> kern;
    kern.weight = Tensor<double>::from_data({1, 1, 1, 1}, {1.0});
    kern.bias = Tensor<double>({1, 1, 1, 1});
    kern.deform_groups = 1;
    auto offsets = Tensor<double>({1, 2, 3, 3}, true);
    auto out = dcn_forward(x, offsets, kern);
    auto loss = sum_all(out);
    backward(loss);
    // at (1,1): dy gradient = x(2,1) - x(1,1) = 20, dx gradient = 1
    CHECK(offsets.grad()[offsets.index(0, 0, 1, 1)] == doctest::Approx(20.0));
    CHECK(offsets.grad()[offsets.index(0, 1, 1, 1)] == doctest::Approx(1.0));
}

TEST_CASE("dcn configuration errors") {
    std::mt19937_64 rng(41);
    auto x = random_tensor<float>({1, 3, 4, 4}, rng, false);
    auto kern = random_kernel<float>(3, 2, 3, 3, rng, false);
    auto bad_offsets = Tensor<float>({1, 10, 4, 4});
    CHECK_THROWS_AS(dcn_forward(x, bad_offsets, kern), std::invalid_argument);
    auto even = random_kernel<float>(3, 2, 2, 3, rng, false);
    auto offsets = Tensor<float>({1, offset_channels(3, 2), 4, 4});
    CHECK_THROWS_AS(dcn_forward(x, offsets, even), std::invalid_argument);
}
