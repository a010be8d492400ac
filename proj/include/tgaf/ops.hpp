#pragma once

#include <cblas-openblas.h>

#include <cmath>
#include <vector>

#include "tgaf/tensor.hpp"

namespace tgaf {

namespace detail {

inline void blas_single_thread() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    blas_single_thread();
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    blas_single_thread();
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

struct ConvGeom {
    int stride = 1, pad = 0, dilation = 1;
    int kh = 0, kw = 0;
    int ho = 0, wo = 0;

    static ConvGeom make(const Dims& in, const Dims& w, int stride, int pad, int dilation) {
        if (stride < 1 || pad < 0 || dilation < 1)
            throw std::invalid_argument("conv2d: invalid stride/padding/dilation");
        if (w.c != in.c) shape_error("conv2d (input channels vs weight)", in, w);
        if (w.h != w.w) throw std::invalid_argument("conv2d: kernel must be square, got " + w.str());
        ConvGeom g;
        g.stride = stride;
        g.pad = pad;
        g.dilation = dilation;
        g.kh = w.h;
        g.kw = w.w;
        g.ho = (in.h + 2 * pad - dilation * (w.h - 1) - 1) / stride + 1;
        g.wo = (in.w + 2 * pad - dilation * (w.w - 1) - 1) / stride + 1;
        if (g.ho < 1 || g.wo < 1)
            throw std::invalid_argument("conv2d: kernel does not fit input " + in.str());
        return g;
    }
};

// col is [Cin*Kh*Kw, Ho*Wo], zero padding outside borders.
template <typename T>
void im2col(const T* img, int c_in, int h, int w, const ConvGeom& g, T* col) {
    const int span = g.ho * g.wo;
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ky = 0; ky < g.kh; ++ky) {
            for (int kx = 0; kx < g.kw; ++kx) {
                T* dst = col + (std::int64_t(ci) * g.kh * g.kw + ky * g.kw + kx) * span;
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky * g.dilation;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + g.wo, T(0));
                        dst += g.wo;
                        continue;
                    }
                    const T* src = img + (std::int64_t(ci) * h + iy) * w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx * g.dilation;
                        *dst++ = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_accum(const T* col, int c_in, int h, int w, const ConvGeom& g, T* img) {
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ky = 0; ky < g.kh; ++ky) {
            for (int kx = 0; kx < g.kw; ++kx) {
                const T* src = col + (std::int64_t(ci) * g.kh * g.kw + ky * g.kw + kx) * g.ho * g.wo;
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky * g.dilation;
                    if (iy < 0 || iy >= h) {
                        src += g.wo;
                        continue;
                    }
                    T* dst = img + (std::int64_t(ci) * h + iy) * w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx * g.dilation;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                    src += g.wo;
                }
            }
        }
    }
}

// Zero-padded bilinear read at fractional (y, x); out-of-range corners read 0.
template <typename T>
struct BilinearCell {
    int y0 = 0, x0 = 0;
    T fy = 0, fx = 0;

    void init(T y, T x) {
        y0 = static_cast<int>(std::floor(y));
        x0 = static_cast<int>(std::floor(x));
        fy = y - T(y0);
        fx = x - T(x0);
    }
    T tap(const T* plane, int h, int w, int y, int x) const {
        return (y >= 0 && y < h && x >= 0 && x < w) ? plane[std::int64_t(y) * w + x] : T(0);
    }
    T sample(const T* plane, int h, int w) const {
        const T p00 = tap(plane, h, w, y0, x0), p01 = tap(plane, h, w, y0, x0 + 1);
        const T p10 = tap(plane, h, w, y0 + 1, x0), p11 = tap(plane, h, w, y0 + 1, x0 + 1);
        return (1 - fy) * ((1 - fx) * p00 + fx * p01) + fy * ((1 - fx) * p10 + fx * p11);
    }
    void scatter(T* gplane, int h, int w, T g) const {
        auto put = [&](int y, int x, T v) {
            if (y >= 0 && y < h && x >= 0 && x < w) gplane[std::int64_t(y) * w + x] += v;
        };
        put(y0, x0, g * (1 - fy) * (1 - fx));
        put(y0, x0 + 1, g * (1 - fy) * fx);
        put(y0 + 1, x0, g * fy * (1 - fx));
        put(y0 + 1, x0 + 1, g * fy * fx);
    }
    T ddy(const T* plane, int h, int w) const {
        const T p00 = tap(plane, h, w, y0, x0), p01 = tap(plane, h, w, y0, x0 + 1);
        const T p10 = tap(plane, h, w, y0 + 1, x0), p11 = tap(plane, h, w, y0 + 1, x0 + 1);
        return (1 - fx) * (p10 - p00) + fx * (p11 - p01);
    }
    T ddx(const T* plane, int h, int w) const {
        const T p00 = tap(plane, h, w, y0, x0), p01 = tap(plane, h, w, y0, x0 + 1);
        const T p10 = tap(plane, h, w, y0 + 1, x0), p11 = tap(plane, h, w, y0 + 1, x0 + 1);
        return (1 - fy) * (p01 - p00) + fy * (p11 - p10);
    }
};

}  // namespace detail

/// 2-D convolution, zero padding, square kernel. Weight is [Cout,Cin,K,K],
/// bias [1,Cout,1,1].
template <typename T>
Tensor<T> conv2d(Tensor<T> input, Tensor<T> weight, Tensor<T> bias, int stride = 1, int padding = 0,
                 int dilation = 1) {
    const Dims& in = input.dims();
    const Dims& wd = weight.dims();
    const auto g = detail::ConvGeom::make(in, wd, stride, padding, dilation);
    if (bias.dims().c != wd.n || bias.dims().n != 1 || bias.dims().h != 1 || bias.dims().w != 1)
        shape_error("conv2d (bias vs weight)", bias.dims(), wd);

    const int c_out = wd.n, ckk = wd.c * wd.h * wd.w;
    const int span = g.ho * g.wo;
    Tensor<T> out = Tensor<T>::make_result({in.n, c_out, g.ho, g.wo}, {input, weight, bias});

    std::vector<T> col(std::size_t(ckk) * span);
    for (int n = 0; n < in.n; ++n) {
        detail::im2col(input.data().data() + input.index(n, 0, 0, 0), in.c, in.h, in.w, g,
                       col.data());
        T* o = out.data().data() + out.index(n, 0, 0, 0);
        detail::gemm(false, false, c_out, span, ckk, T(1), weight.data().data(), ckk, col.data(),
                     span, T(0), o, span);
        for (int co = 0; co < c_out; ++co) {
            const T b = bias.data()[co];
            for (int i = 0; i < span; ++i) o[std::int64_t(co) * span + i] += b;
        }
    }

    auto* self = out.node().get();
    out.set_backward([self, input, weight, bias, g, c_out, ckk, span]() mutable {
        const Dims in = input.dims();
        std::vector<T> col(std::size_t(ckk) * span);
        std::vector<T> dcol;
        if (input.requires_grad()) dcol.resize(col.size());
        for (int n = 0; n < in.n; ++n) {
            const T* go = self->grad.data() + std::int64_t(n) * c_out * span;
            if (weight.requires_grad() || input.requires_grad())
                detail::im2col(input.data().data() + input.index(n, 0, 0, 0), in.c, in.h, in.w, g,
                               col.data());
            if (weight.requires_grad())
                detail::gemm(false, true, c_out, ckk, span, T(1), go, span, col.data(), span, T(1),
                             weight.grad().data(), ckk);
            if (bias.requires_grad()) {
                for (int co = 0; co < c_out; ++co) {
                    T s = 0;
                    for (int i = 0; i < span; ++i) s += go[std::int64_t(co) * span + i];
                    bias.grad()[co] += s;
                }
            }
            if (input.requires_grad()) {
                detail::gemm(true, false, ckk, span, c_out, T(1), weight.data().data(), ckk, go,
                             span, T(0), dcol.data(), span);
                detail::col2im_accum(dcol.data(), in.c, in.h, in.w, g,
                                     input.grad().data() + input.index(n, 0, 0, 0));
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> leaky_relu(Tensor<T> x, T slope) {
    if (!(slope >= T(0) && slope < T(1)))
        throw std::invalid_argument("leaky_relu: slope must be in [0,1)");
    Tensor<T> out = Tensor<T>::make_result(x.dims(), {x});
    const auto& xd = x.data();
    auto& od = out.data();
    for (size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] >= T(0) ? xd[i] : slope * xd[i];

    auto* self = out.node().get();
    out.set_backward([self, x, slope]() mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        const auto& xd = x.data();
        for (size_t i = 0; i < xd.size(); ++i)
            gx[i] += self->grad[i] * (xd[i] >= T(0) ? T(1) : slope);
    });
    return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: no parts");
    const Dims& d0 = parts[0].dims();
    int c_total = 0;
    for (const auto& p : parts) {
        const Dims& d = p.dims();
        if (d.n != d0.n || d.h != d0.h || d.w != d0.w)
            shape_error("concat_channels", d0, d);
        c_total += d.c;
    }
    Tensor<T> out = Tensor<T>::make_result({d0.n, c_total, d0.h, d0.w}, parts);
    const std::int64_t plane = std::int64_t(d0.h) * d0.w;
    for (int n = 0; n < d0.n; ++n) {
        std::int64_t c_off = 0;
        for (const auto& p : parts) {
            const int pc = p.dims().c;
            std::copy_n(p.data().data() + std::int64_t(n) * pc * plane, pc * plane,
                        out.data().data() + (std::int64_t(n) * c_total + c_off) * plane);
            c_off += pc;
        }
    }
    auto* self = out.node().get();
    auto parts_copy = parts;
    out.set_backward([self, parts_copy, c_total, plane, d0]() mutable {
        for (int n = 0; n < d0.n; ++n) {
            std::int64_t c_off = 0;
            for (auto& p : parts_copy) {
                const int pc = p.dims().c;
                if (p.requires_grad()) {
                    const T* g = self->grad.data() + (std::int64_t(n) * c_total + c_off) * plane;
                    T* gp = p.grad().data() + std::int64_t(n) * pc * plane;
                    for (std::int64_t i = 0; i < pc * plane; ++i) gp[i] += g[i];
                }
                c_off += pc;
            }
        }
    });
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(Tensor<T> x, int parts) {
    const Dims& d = x.dims();
    if (parts < 1 || d.c % parts != 0)
        throw std::invalid_argument("split_channels: C=" + std::to_string(d.c) +
                                    " not divisible by parts=" + std::to_string(parts));
    const int pc = d.c / parts;
    const std::int64_t plane = std::int64_t(d.h) * d.w;
    std::vector<Tensor<T>> out;
    for (int part = 0; part < parts; ++part) {
        Tensor<T> t = Tensor<T>::make_result({d.n, pc, d.h, d.w}, {x});
        for (int n = 0; n < d.n; ++n)
            std::copy_n(x.data().data() + (std::int64_t(n) * d.c + part * pc) * plane, pc * plane,
                        t.data().data() + std::int64_t(n) * pc * plane);
        auto* self = t.node().get();
        out.push_back(t);
        t.set_backward([self, x, part, pc, plane, d]() mutable {
            if (!x.requires_grad()) return;
            for (int n = 0; n < d.n; ++n) {
                const T* g = self->grad.data() + std::int64_t(n) * pc * plane;
                T* gx = x.grad().data() + (std::int64_t(n) * d.c + part * pc) * plane;
                for (std::int64_t i = 0; i < pc * plane; ++i) gx[i] += g[i];
            }
        });
    }
    return out;
}

namespace detail {

// Broadcast classification for add/mul: equal shapes, or one side [N,C,1,1].
enum class Broadcast { none, rhs_scale, lhs_scale };

template <typename T>
Broadcast classify_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
    const Dims &da = a.dims(), &db = b.dims();
    if (da == db) return Broadcast::none;
    if (db.n == da.n && db.c == da.c && db.h == 1 && db.w == 1) return Broadcast::rhs_scale;
    if (da.n == db.n && da.c == db.c && da.h == 1 && da.w == 1) return Broadcast::lhs_scale;
    shape_error("elementwise", da, db);
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    auto bc = detail::classify_broadcast(a, b);
    if (bc == detail::Broadcast::lhs_scale) return add(b, a);
    const Dims& d = a.dims();
    Tensor<T> out = Tensor<T>::make_result(d, {a, b});
    const std::int64_t plane = std::int64_t(d.h) * d.w;
    if (bc == detail::Broadcast::none) {
        for (size_t i = 0; i < out.data().size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    } else {
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c) {
                const T s = b.data()[std::int64_t(n) * d.c + c];
                const T* pa = a.data().data() + (std::int64_t(n) * d.c + c) * plane;
                T* po = out.data().data() + (std::int64_t(n) * d.c + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) po[i] = pa[i] + s;
            }
    }
    auto* self = out.node().get();
    out.set_backward([self, a, b, bc, d, plane]() mutable {
        if (a.requires_grad())
            for (size_t i = 0; i < self->grad.size(); ++i) a.grad()[i] += self->grad[i];
        if (b.requires_grad()) {
            if (bc == detail::Broadcast::none) {
                for (size_t i = 0; i < self->grad.size(); ++i) b.grad()[i] += self->grad[i];
            } else {
                for (int n = 0; n < d.n; ++n)
                    for (int c = 0; c < d.c; ++c) {
                        const T* g = self->grad.data() + (std::int64_t(n) * d.c + c) * plane;
                        T s = 0;
                        for (std::int64_t i = 0; i < plane; ++i) s += g[i];
                        b.grad()[std::int64_t(n) * d.c + c] += s;
                    }
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    auto bc = detail::classify_broadcast(a, b);
    if (bc == detail::Broadcast::lhs_scale) return mul(b, a);
    const Dims& d = a.dims();
    Tensor<T> out = Tensor<T>::make_result(d, {a, b});
    const std::int64_t plane = std::int64_t(d.h) * d.w;
    if (bc == detail::Broadcast::none) {
        for (size_t i = 0; i < out.data().size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    } else {
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c) {
                const T s = b.data()[std::int64_t(n) * d.c + c];
                const T* pa = a.data().data() + (std::int64_t(n) * d.c + c) * plane;
                T* po = out.data().data() + (std::int64_t(n) * d.c + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) po[i] = pa[i] * s;
            }
    }
    auto* self = out.node().get();
    out.set_backward([self, a, b, bc, d, plane]() mutable {
        if (bc == detail::Broadcast::none) {
            if (a.requires_grad())
                for (size_t i = 0; i < self->grad.size(); ++i)
                    a.grad()[i] += self->grad[i] * b.data()[i];
            if (b.requires_grad())
                for (size_t i = 0; i < self->grad.size(); ++i)
                    b.grad()[i] += self->grad[i] * a.data()[i];
        } else {
            for (int n = 0; n < d.n; ++n)
                for (int c = 0; c < d.c; ++c) {
                    const std::int64_t base = (std::int64_t(n) * d.c + c) * plane;
                    const T s = b.data()[std::int64_t(n) * d.c + c];
                    if (a.requires_grad()) {
                        T* ga = a.grad().data() + base;
                        for (std::int64_t i = 0; i < plane; ++i) ga[i] += self->grad[base + i] * s;
                    }
                    if (b.requires_grad()) {
                        T acc = 0;
                        const T* pa = a.data().data() + base;
                        for (std::int64_t i = 0; i < plane; ++i) acc += self->grad[base + i] * pa[i];
                        b.grad()[std::int64_t(n) * d.c + c] += acc;
                    }
                }
        }
    });
    return out;
}

template <typename T>
Tensor<T> sigmoid(Tensor<T> x) {
    Tensor<T> out = Tensor<T>::make_result(x.dims(), {x});
    for (size_t i = 0; i < x.data().size(); ++i) out.data()[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
    auto* self = out.node().get();
    out.set_backward([self, x]() mutable {
        if (!x.requires_grad()) return;
        for (size_t i = 0; i < self->grad.size(); ++i) {
            const T s = self->data[i];
            x.grad()[i] += self->grad[i] * s * (T(1) - s);
        }
    });
    return out;
}

template <typename T>
Tensor<T> global_avg_pool(Tensor<T> x) {
    const Dims& d = x.dims();
    Tensor<T> out = Tensor<T>::make_result({d.n, d.c, 1, 1}, {x});
    const std::int64_t plane = std::int64_t(d.h) * d.w;
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
            const T* p = x.data().data() + (std::int64_t(n) * d.c + c) * plane;
            T s = 0;
            for (std::int64_t i = 0; i < plane; ++i) s += p[i];
            out.data()[std::int64_t(n) * d.c + c] = s / T(plane);
        }
    auto* self = out.node().get();
    out.set_backward([self, x, d, plane]() mutable {
        if (!x.requires_grad()) return;
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c) {
                const T g = self->grad[std::int64_t(n) * d.c + c] / T(plane);
                T* gp = x.grad().data() + (std::int64_t(n) * d.c + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) gp[i] += g;
            }
    });
    return out;
}

/// Fractional sampling of `feature` at positions given by `coords`
/// [N,2,Ho,Wo] (channel 0 = y, channel 1 = x). Out-of-range neighbors
/// read zero; differentiable w.r.t. both arguments.
template <typename T>
Tensor<T> bilinear_sample(Tensor<T> feature, Tensor<T> coords) {
    const Dims& fd = feature.dims();
    const Dims& cd = coords.dims();
    if (cd.n != fd.n || cd.c != 2) shape_error("bilinear_sample (coords)", fd, cd);
    for (T v : coords.data())
        if (!std::isfinite(v)) throw std::invalid_argument("bilinear_sample: non-finite coordinate");

    Tensor<T> out = Tensor<T>::make_result({fd.n, fd.c, cd.h, cd.w}, {feature, coords});
    const std::int64_t fplane = std::int64_t(fd.h) * fd.w;
    const std::int64_t oplane = std::int64_t(cd.h) * cd.w;
    for (int n = 0; n < fd.n; ++n)
        for (std::int64_t i = 0; i < oplane; ++i) {
            detail::BilinearCell<T> cell;
            cell.init(coords.data()[(std::int64_t(n) * 2 + 0) * oplane + i],
                      coords.data()[(std::int64_t(n) * 2 + 1) * oplane + i]);
            for (int c = 0; c < fd.c; ++c) {
                const T* plane = feature.data().data() + (std::int64_t(n) * fd.c + c) * fplane;
                out.data()[(std::int64_t(n) * fd.c + c) * oplane + i] =
                    cell.sample(plane, fd.h, fd.w);
            }
        }
    auto* self = out.node().get();
    out.set_backward([self, feature, coords, fd, cd, fplane, oplane]() mutable {
        for (int n = 0; n < fd.n; ++n)
            for (std::int64_t i = 0; i < oplane; ++i) {
                detail::BilinearCell<T> cell;
                cell.init(coords.data()[(std::int64_t(n) * 2 + 0) * oplane + i],
                          coords.data()[(std::int64_t(n) * 2 + 1) * oplane + i]);
                T gy = 0, gx = 0;
                for (int c = 0; c < fd.c; ++c) {
                    const T g = self->grad[(std::int64_t(n) * fd.c + c) * oplane + i];
                    const T* plane = feature.data().data() + (std::int64_t(n) * fd.c + c) * fplane;
                    if (feature.requires_grad())
                        cell.scatter(feature.grad().data() + (std::int64_t(n) * fd.c + c) * fplane,
                                     fd.h, fd.w, g);
                    if (coords.requires_grad()) {
                        gy += g * cell.ddy(plane, fd.h, fd.w);
                        gx += g * cell.ddx(plane, fd.h, fd.w);
                    }
                }
                if (coords.requires_grad()) {
                    coords.grad()[(std::int64_t(n) * 2 + 0) * oplane + i] += gy;
                    coords.grad()[(std::int64_t(n) * 2 + 1) * oplane + i] += gx;
                }
            }
    });
    return out;
}

template <typename T>
Tensor<T> upsample_nearest2x(Tensor<T> x) {
    const Dims& d = x.dims();
    Tensor<T> out = Tensor<T>::make_result({d.n, d.c, d.h * 2, d.w * 2}, {x});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < 2 * d.h; ++y)
                for (int xw = 0; xw < 2 * d.w; ++xw)
                    out.at(n, c, y, xw) = x.at(n, c, y / 2, xw / 2);
    auto* self = out.node().get();
    out.set_backward([self, x, d]() mutable {
        if (!x.requires_grad()) return;
        const std::int64_t ow = 2 * d.w;
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c)
                for (int y = 0; y < 2 * d.h; ++y)
                    for (std::int64_t xw = 0; xw < ow; ++xw)
                        x.grad()[x.index(n, c, y / 2, int(xw / 2))] +=
                            self->grad[((std::int64_t(n) * d.c + c) * 2 * d.h + y) * ow + xw];
    });
    return out;
}

template <typename T>
Tensor<T> crop_spatial(Tensor<T> x, int top, int left, int h, int w) {
    const Dims& d = x.dims();
    if (top < 0 || left < 0 || top + h > d.h || left + w > d.w)
        throw std::invalid_argument("crop_spatial: window out of range for " + d.str());
    Tensor<T> out = Tensor<T>::make_result({d.n, d.c, h, w}, {x});
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < h; ++y)
                std::copy_n(x.data().data() + x.index(n, c, top + y, left), w,
                            out.data().data() + out.index(n, c, y, 0));
    auto* self = out.node().get();
    out.set_backward([self, x, top, left, h, w, d]() mutable {
        if (!x.requires_grad()) return;
        for (int n = 0; n < d.n; ++n)
            for (int c = 0; c < d.c; ++c)
                for (int y = 0; y < h; ++y) {
                    const T* g = self->grad.data() + ((std::int64_t(n) * d.c + c) * h + y) * w;
                    T* gx = x.grad().data() + x.index(n, c, top + y, left);
                    for (int i = 0; i < w; ++i) gx[i] += g[i];
                }
    });
    return out;
}

template <typename T>
Tensor<T> sum_all(Tensor<T> x) {
    Tensor<T> out = Tensor<T>::make_result({1, 1, 1, 1}, {x});
    T s = 0;
    for (T v : x.data()) s += v;
    out.data()[0] = s;
    auto* self = out.node().get();
    out.set_backward([self, x]() mutable {
        if (!x.requires_grad()) return;
        const T g = self->grad[0];
        for (auto& gv : x.grad()) gv += g;
    });
    return out;
}

/// Multiply by a compile-time constant scalar (not a graph input).
template <typename T>
Tensor<T> scale(Tensor<T> x, T s) {
    Tensor<T> out = Tensor<T>::make_result(x.dims(), {x});
    for (size_t i = 0; i < x.data().size(); ++i) out.data()[i] = x.data()[i] * s;
    auto* self = out.node().get();
    out.set_backward([self, x, s]() mutable {
        if (!x.requires_grad()) return;
        for (size_t i = 0; i < self->grad.size(); ++i) x.grad()[i] += self->grad[i] * s;
    });
    return out;
}

}  // namespace tgaf
