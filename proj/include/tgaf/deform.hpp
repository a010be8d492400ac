#pragma once

#include "tgaf/ops.hpp"
#include "tgaf/tensor.hpp"

namespace tgaf {

/// Weights of one deformable convolution. Input channel ci reads the
/// offset group floor(ci / (Cin / deform_groups)).
template <typename T>
struct DeformKernel {
    Tensor<T> weight;  // [Cout, Cin, K, K]
    Tensor<T> bias;    // [1, Cout, 1, 1]
    int deform_groups = 1;

    int kernel() const { return weight.dims().h; }
};

inline int offset_channels(int deform_groups, int kernel) {
    return 2 * deform_groups * kernel * kernel;
}

/// Deformable convolution, stride 1, pad (K-1)/2 (spatial dims preserved).
/// Offsets are [N, 2*G*K^2, H, W]; for group g and kernel sample s
/// (row-major over the KxK grid), channel 2*(g*K^2+s) holds dy and
/// 2*(g*K^2+s)+1 holds dx. Differentiable w.r.t. input, offsets, weight
/// and bias.
template <typename T>
Tensor<T> dcn_forward(Tensor<T> input, Tensor<T> offsets, const DeformKernel<T>& kernel) {
    const Dims& in = input.dims();
    const Dims& wd = kernel.weight.dims();
    const int k = wd.h;
    if (k != wd.w || k % 2 == 0)
        throw std::invalid_argument("dcn_forward: kernel must be square and odd, got " + wd.str());
    if (wd.c != in.c) shape_error("dcn_forward (input channels vs weight)", in, wd);
    const int groups = kernel.deform_groups;
    if (groups < 1 || in.c % groups != 0)
        throw std::invalid_argument("dcn_forward: Cin=" + std::to_string(in.c) +
                                    " not divisible by deform_groups=" + std::to_string(groups));
    const Dims& od = offsets.dims();
    if (od.c != offset_channels(groups, k))
        throw std::invalid_argument("dcn_forward: offset channels " + std::to_string(od.c) +
                                    " != 2*G*K^2 = " + std::to_string(offset_channels(groups, k)));
    if (od.n != in.n || od.h != in.h || od.w != in.w)
        shape_error("dcn_forward (offsets vs input)", in, od);

    const int pad = (k - 1) / 2;
    const int c_out = wd.n, ckk = in.c * k * k;
    const std::int64_t plane = std::int64_t(in.h) * in.w;
    const int group_size = in.c / groups;

    Tensor<T> out =
        Tensor<T>::make_result({in.n, c_out, in.h, in.w}, {input, offsets, kernel.weight, kernel.bias});

    // Sampled-column buffer, same role as im2col for plain convolution.
    auto build_col = [=](const Tensor<T>& x, const Tensor<T>& off, int n, T* col) {
        for (int ci = 0; ci < in.c; ++ci) {
            const int g = ci / group_size;
            const T* xplane = x.data().data() + (std::int64_t(n) * in.c + ci) * plane;
            for (int s = 0; s < k * k; ++s) {
                const int sy = s / k, sx = s % k;
                const T* offy =
                    off.data().data() + (std::int64_t(n) * od.c + 2 * (g * k * k + s)) * plane;
                const T* offx = offy + plane;
                T* dst = col + (std::int64_t(ci) * k * k + s) * plane;
                for (int y = 0; y < in.h; ++y)
                    for (int x2 = 0; x2 < in.w; ++x2) {
                        const std::int64_t i = std::int64_t(y) * in.w + x2;
                        detail::BilinearCell<T> cell;
                        cell.init(T(y + sy - pad) + offy[i], T(x2 + sx - pad) + offx[i]);
                        dst[i] = cell.sample(xplane, in.h, in.w);
                    }
            }
        }
    };

    std::vector<T> col(std::size_t(ckk) * plane);
    for (int n = 0; n < in.n; ++n) {
        build_col(input, offsets, n, col.data());
        T* o = out.data().data() + out.index(n, 0, 0, 0);
        detail::gemm(false, false, c_out, int(plane), ckk, T(1), kernel.weight.data().data(), ckk,
                     col.data(), int(plane), T(0), o, int(plane));
        for (int co = 0; co < c_out; ++co) {
            const T b = kernel.bias.data()[co];
            for (std::int64_t i = 0; i < plane; ++i) o[std::int64_t(co) * plane + i] += b;
        }
    }

    auto* self = out.node().get();
    Tensor<T> weight = kernel.weight;
    Tensor<T> bias = kernel.bias;
    out.set_backward([self, input, offsets, weight, bias, build_col, in, od, k, pad, c_out, ckk,
                      plane, group_size]() mutable {
        std::vector<T> col(std::size_t(ckk) * plane);
        std::vector<T> dcol(col.size());
        for (int n = 0; n < in.n; ++n) {
            const T* go = self->grad.data() + std::int64_t(n) * c_out * plane;
            if (weight.requires_grad()) {
                build_col(input, offsets, n, col.data());
                detail::gemm(false, true, c_out, ckk, int(plane), T(1), go, int(plane), col.data(),
                             int(plane), T(1), weight.grad().data(), ckk);
            }
            if (bias.requires_grad()) {
                for (int co = 0; co < c_out; ++co) {
                    T s = 0;
                    for (std::int64_t i = 0; i < plane; ++i) s += go[std::int64_t(co) * plane + i];
                    bias.grad()[co] += s;
                }
            }
            if (!input.requires_grad() && !offsets.requires_grad()) continue;
            detail::gemm(true, false, ckk, int(plane), c_out, T(1), weight.data().data(), ckk, go,
                         int(plane), T(0), dcol.data(), int(plane));
            for (int ci = 0; ci < in.c; ++ci) {
                const int g = ci / group_size;
                const T* xplane = input.data().data() + (std::int64_t(n) * in.c + ci) * plane;
                T* gxplane = input.requires_grad()
                                 ? input.grad().data() + (std::int64_t(n) * in.c + ci) * plane
                                 : nullptr;
                for (int s = 0; s < k * k; ++s) {
                    const int sy = s / k, sx = s % k;
                    const std::int64_t off_base = (std::int64_t(n) * od.c + 2 * (g * k * k + s)) * plane;
                    const T* offy = offsets.data().data() + off_base;
                    const T* offx = offy + plane;
                    const T* gcol = dcol.data() + (std::int64_t(ci) * k * k + s) * plane;
                    for (int y = 0; y < in.h; ++y)
                        for (int x2 = 0; x2 < in.w; ++x2) {
                            const std::int64_t i = std::int64_t(y) * in.w + x2;
                            const T gv = gcol[i];
                            if (gv == T(0)) continue;
                            detail::BilinearCell<T> cell;
                            cell.init(T(y + sy - pad) + offy[i], T(x2 + sx - pad) + offx[i]);
                            if (gxplane) cell.scatter(gxplane, in.h, in.w, gv);
                            if (offsets.requires_grad()) {
                                offsets.grad()[off_base + i] += gv * cell.ddy(xplane, in.h, in.w);
                                offsets.grad()[off_base + plane + i] +=
                                    gv * cell.ddx(xplane, in.h, in.w);
                            }
                        }
                }
            }
        }
    });
    return out;
}

}  // namespace tgaf
