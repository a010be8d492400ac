#include <doctest.h>

#include <random>

#include "tgaf/gradcheck.hpp"
#include "tgaf/ops.hpp"

using namespace tgaf;

TEST_CASE("conv2d 1x1 kernel scales the input") {
    auto x = Tensor<float>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto w = Tensor<float>::from_data({1, 1, 1, 1}, {2});
    auto b = Tensor<float>::from_data({1, 1, 1, 1}, {0});
    auto y = conv2d(x, w, b, 1, 0);
    CHECK(y.data() == std::vector<float>{2, 4, 6, 8});
}

TEST_CASE("conv2d all-ones 3x3 on 2x2 with pad 1") {
    // hand convolution over the zero-padded grid: every output sees all
    // four ones
    auto x = Tensor<float>::full({1, 1, 2, 2}, 1.f);
    auto w = Tensor<float>::full({1, 1, 3, 3}, 1.f);
    auto b = Tensor<float>::from_data({1, 1, 1, 1}, {0});
    auto y = conv2d(x, w, b, 1, 1);
    for (float v : y.data()) CHECK(v == doctest::Approx(4.f));
}

TEST_CASE("conv2d shape contract") {
    auto x = Tensor<float>({1, 2, 4, 4});
    auto w = Tensor<float>({3, 2, 3, 3});
    auto b = Tensor<float>({1, 3, 1, 1});
    auto y = conv2d(x, w, b, 1, 1);
    CHECK(y.dims() == Dims{1, 3, 4, 4});
}

TEST_CASE("conv2d rejects channel mismatch with both shapes named") {
    auto x = Tensor<float>({1, 2, 4, 4});
    auto w = Tensor<float>({3, 5, 3, 3});
    auto b = Tensor<float>({1, 3, 1, 1});
    CHECK_THROWS_WITH_AS(conv2d(x, w, b, 1, 1),
                         doctest::Contains("[1,2,4,4]"), std::invalid_argument);
}

TEST_CASE("conv2d identity kernel is the identity map") {
    std::mt19937_64 rng(7);
    auto x = random_tensor<float>({2, 3, 5, 4}, rng, false);
    auto w = Tensor<float>({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.f;
    auto b = Tensor<float>({1, 3, 1, 1});
    auto y = conv2d(x, w, b, 1, 0);
    CHECK(y.data() == x.data());
}

TEST_CASE("leaky_relu values and zero convention") {
    auto x = Tensor<float>::from_data({1, 1, 1, 3}, {3, -2, 0});
    auto y = leaky_relu(x, 0.1f);
    CHECK(y.data()[0] == doctest::Approx(3));
    CHECK(y.data()[1] == doctest::Approx(-0.2));
    CHECK(y.data()[2] == 0.f);

    auto xz = Tensor<double>::from_data({1, 1, 1, 1}, {0.0}, true);
    auto l = sum_all(leaky_relu(xz, 0.1));
    backward(l);
    CHECK(xz.grad()[0] == 1.0);  // positive branch at exactly zero
}

TEST_CASE("concat and split round trip") {
    std::mt19937_64 rng(3);
    auto a = random_tensor<float>({1, 2, 4, 4}, rng, false);
    auto b = random_tensor<float>({1, 3, 4, 4}, rng, false);
    auto cat = concat_channels<float>({a, b});
    CHECK(cat.dims() == Dims{1, 5, 4, 4});

    auto one = concat_channels<float>({a});
    CHECK(one.data() == a.data());

    auto x = random_tensor<float>({1, 6, 2, 2}, rng, false);
    auto parts = split_channels(x, 3);
    REQUIRE(parts.size() == 3);
    for (auto& p : parts) CHECK(p.dims() == Dims{1, 2, 2, 2});
    auto back = concat_channels(parts);
    CHECK(back.data() == x.data());

    CHECK_THROWS_AS(split_channels(x, 4), std::invalid_argument);
    CHECK(split_channels(x, 1)[0].data() == x.data());
}

TEST_CASE("elementwise add, mul broadcast, sigmoid") {
    auto z = Tensor<float>::from_data({1, 1, 1, 1}, {0});
    CHECK(sigmoid(z).data()[0] == doctest::Approx(0.5));

    std::mt19937_64 rng(5);
    auto x = random_tensor<float>({1, 2, 3, 3}, rng, false);
    auto zeros = Tensor<float>({1, 2, 3, 3});
    CHECK(add(x, zeros).data() == x.data());

    auto f = Tensor<float>::full({1, 2, 2, 2}, 1.f);
    auto s = Tensor<float>::from_data({1, 2, 1, 1}, {2, 3});
    auto m = mul(f, s);
    for (int i = 0; i < 4; ++i) CHECK(m.data()[i] == 2.f);
    for (int i = 4; i < 8; ++i) CHECK(m.data()[i] == 3.f);

    auto bad = Tensor<float>({1, 3, 2, 2});
    CHECK_THROWS_AS(add(f, bad), std::invalid_argument);
}

TEST_CASE("global_avg_pool") {
    auto x = Tensor<float>::from_data({1, 1, 2, 2}, {1, 3, 5, 7});
    CHECK(global_avg_pool(x).data()[0] == doctest::Approx(4));

    auto c = Tensor<float>::full({1, 2, 3, 3}, 2.5f);
    auto pooled = global_avg_pool(c);
    for (float v : pooled.data()) CHECK(v == doctest::Approx(2.5));

    auto tiny = Tensor<float>::from_data({1, 2, 1, 1}, {4, 9});
    CHECK(global_avg_pool(tiny).data() == tiny.data());
}

TEST_CASE("bilinear_sample values and border convention") {
    auto f = Tensor<float>::from_data({1, 1, 2, 2}, {0, 1, 2, 3});
    auto mkcoord = [](float y, float x) {
        return Tensor<float>::from_data({1, 2, 1, 1}, {y, x});
    };
    CHECK(bilinear_sample(f, mkcoord(0.5f, 0.5f)).data()[0] == doctest::Approx(1.5));
    CHECK(bilinear_sample(f, mkcoord(0.f, 1.f)).data()[0] == 1.f);
    CHECK(bilinear_sample(f, mkcoord(-1.f, -1.f)).data()[0] == 0.f);
    CHECK_THROWS_AS(bilinear_sample(f, mkcoord(NAN, 0.f)), std::invalid_argument);
}

TEST_CASE("bilinear_sample reproduces stored values at integer coords") {
    std::mt19937_64 rng(11);
    auto f = random_tensor<float>({1, 3, 4, 5}, rng, false);
    Tensor<float> coords({1, 2, 4, 5});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
            coords.at(0, 0, y, x) = float(y);
            coords.at(0, 1, y, x) = float(x);
        }
    auto out = bilinear_sample(f, coords);
    CHECK(out.data() == f.data());
}

TEST_CASE("backward: analytic derivative, reuse, detachment") {
    auto x = Tensor<double>::from_data({1, 1, 1, 2}, {1, 2}, true);
    auto loss = sum_all(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2));
    CHECK(x.grad()[1] == doctest::Approx(4));

    // same graph twice without reset doubles every gradient
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(4));
    CHECK(x.grad()[1] == doctest::Approx(8));

    // a tensor used twice accumulates both paths
    auto y = Tensor<double>::from_data({1, 1, 1, 1}, {3}, true);
    auto l2 = sum_all(add(y, y));
    backward(l2);
    CHECK(y.grad()[0] == doctest::Approx(2));

    auto d = Tensor<double>::from_data({1, 1, 1, 1}, {3}, false);
    auto l3 = sum_all(mul(d, d));
    backward(l3);
    CHECK_FALSE(d.has_grad());

    auto ns = Tensor<double>({1, 1, 2, 2}, true);
    CHECK_THROWS_AS(backward(ns), std::invalid_argument);
}

TEST_CASE("finite differences agree with reverse mode for every op") {
    std::mt19937_64 rng(42);
    const double tol = 1e-4;

    for (int trial = 0; trial < 5; ++trial) {
        CAPTURE(trial);
        // conv2d w.r.t. input, weight, bias (stride 2 on one trial)
        {
            auto x = random_tensor<double>({2, 2, 5, 5}, rng);
            auto w = random_tensor<double>({3, 2, 3, 3}, rng);
            auto b = random_tensor<double>({1, 3, 1, 1}, rng);
            const int stride = trial == 4 ? 2 : 1;
            auto build = [&] { return weighted_sum(conv2d(x, w, b, stride, 1), 99 + trial); };
            CHECK(gradcheck_max_err<double>(build, {x, w, b}) < tol);
        }
        // leaky_relu (inputs away from the kink)
        {
            auto x = random_tensor<double>({1, 2, 4, 4}, rng);
            auto build = [&] { return weighted_sum(leaky_relu(x, 0.1), 7 + trial); };
            CHECK(gradcheck_max_err<double>(build, {x}) < tol);
        }
        // concat + split
        {
            auto a = random_tensor<double>({1, 2, 3, 3}, rng);
            auto b = random_tensor<double>({1, 4, 3, 3}, rng);
            auto build = [&] {
                auto parts = split_channels(concat_channels<double>({a, b}), 3);
                return weighted_sum(parts[1], 17 + trial);
            };
            CHECK(gradcheck_max_err<double>(build, {a, b}) < tol);
        }
        // elementwise add/mul with broadcast, sigmoid
        {
            auto a = random_tensor<double>({2, 3, 3, 3}, rng);
            auto s = random_tensor<double>({2, 3, 1, 1}, rng);
            auto build = [&] {
                return weighted_sum(sigmoid(add(mul(a, s), a)), 23 + trial);
            };
            CHECK(gradcheck_max_err<double>(build, {a, s}) < tol);
        }
        // global_avg_pool
        {
            auto x = random_tensor<double>({2, 3, 4, 4}, rng);
            auto build = [&] { return weighted_sum(global_avg_pool(x), 31 + trial); };
            CHECK(gradcheck_max_err<double>(build, {x}) < tol);
        }
        // bilinear_sample w.r.t. feature and coordinates
        {
            auto f = random_tensor<double>({1, 2, 5, 5}, rng);
            Tensor<double> coords({1, 2, 3, 3}, true);
            std::uniform_real_distribution<double> pos(0.3, 3.6);
            for (auto& v : coords.data()) v = pos(rng);
            auto build = [&] { return weighted_sum(bilinear_sample(f, coords), 41 + trial); };
            CHECK(gradcheck_max_err<double>(build, {f, coords}) < tol);
        }
        // upsample, crop, scale
        {
            auto x = random_tensor<double>({1, 2, 3, 3}, rng);
            auto build = [&] {
                return weighted_sum(crop_spatial(upsample_nearest2x(scale(x, 0.7)), 1, 1, 4, 4),
                                    53 + trial);
            };
            CHECK(gradcheck_max_err<double>(build, {x}) < tol);
        }
    }
}
