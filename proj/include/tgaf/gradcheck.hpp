#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tgaf/ops.hpp"
#include "tgaf/tensor.hpp"

namespace tgaf {

/// Central finite-difference comparison against reverse-mode gradients.
/// `build` must construct a fresh scalar loss from the current contents
/// of the checked tensors every time it is called.
template <typename T, typename BuildLoss>
double gradcheck_max_err(BuildLoss build, std::vector<Tensor<T>> checked, T step = T(1e-6)) {
    // analytic pass
    for (auto& p : checked) p.zero_grad();
    {
        Tensor<T> loss = build();
        backward(loss);
    }
    std::vector<std::vector<T>> analytic;
    for (auto& p : checked)
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<T>(p.count(), T(0)));

    double worst = 0;
    for (size_t pi = 0; pi < checked.size(); ++pi) {
        auto& data = checked[pi].data();
        for (size_t j = 0; j < data.size(); ++j) {
            const T saved = data[j];
            data[j] = saved + step;
            const T up = build().data()[0];
            data[j] = saved - step;
            const T dn = build().data()[0];
            data[j] = saved;
            const double fd = double(up - dn) / (2.0 * double(step));
            const double an = double(analytic[pi][j]);
            const double err =
                std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            worst = std::max(worst, err);
        }
    }
    for (auto& p : checked) p.zero_grad();
    return worst;
}

/// Random tensor with entries in [-1, 1].
template <typename T>
Tensor<T> random_tensor(Dims d, std::mt19937_64& rng, bool requires_grad = true) {
    Tensor<T> t(d, requires_grad);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : t.data()) v = T(dist(rng));
    return t;
}

/// Scalar projection of an op output against fixed random weights, so a
/// single backward sweep exercises the whole Jacobian.
template <typename T>
Tensor<T> weighted_sum(Tensor<T> x, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor<T> w = random_tensor<T>(x.dims(), rng, false);
    return sum_all(mul(x, w));
}

}  // namespace tgaf
