#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tgaf/data.hpp"
#include "tgaf/deform.hpp"
#include "tgaf/ops.hpp"
#include "tgaf/tensor.hpp"

namespace tgaf {

struct ModelConfig {
    int groups = 3;                          // temporal group count
    int channels = 64;                       // C, feature width
    int sdcb_count = 3;                      // L
    std::vector<int> kernel_sizes = {1, 3, 5};
    double leaky_slope = 0.1;
    int rcab_reduction = 16;
    int unet_levels = 3;
    int unet_base = 0;                       // 0 -> channels/2

    int unet_base_channels() const { return unet_base > 0 ? unet_base : channels / 2; }
    int pad_multiple() const { return 1 << unet_levels; }

    void validate() const {
        if (groups != 3)
            throw std::invalid_argument("config: the fusion stage requires exactly 3 groups");
        if (groups != int(kernel_sizes.size()))
            throw std::invalid_argument("config: kernel_sizes count must equal group count");
        for (int k : kernel_sizes)
            if (k < 1 || k % 2 == 0)
                throw std::invalid_argument("config: kernel sizes must be odd, got " +
                                            std::to_string(k));
        if (channels % 2 != 0)
            throw std::invalid_argument("config: channels=" + std::to_string(channels) +
                                        " must be divisible by 2");
        if (channels % rcab_reduction != 0)
            throw std::invalid_argument("config: channels must be divisible by rcab_reduction");
        if (sdcb_count < 0 || unet_levels < 1 || !(leaky_slope >= 0 && leaky_slope < 1))
            throw std::invalid_argument("config: invalid sdcb_count/unet_levels/leaky_slope");
        if (unet_base_channels() < 1)
            throw std::invalid_argument("config: unet base channels must be >= 1");
    }

    static ModelConfig smoke() {
        ModelConfig c;
        c.channels = 16;
        c.sdcb_count = 1;
        return c;
    }
};

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&)>;

namespace detail {

// Fan-in-scaled uniform init; offset-predicting convolutions are zeroed.
template <typename T>
struct Builder {
    std::mt19937_64 rng;

    Tensor<T> uniform(Dims d, int fan_in) {
        Tensor<T> t(d, true);
        const double bound = std::sqrt(1.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : t.data()) v = T(dist(rng));
        return t;
    }
};

}  // namespace detail

template <typename T>
struct Conv2dLayer {
    Tensor<T> w, b;
    int stride = 1, pad = 0, dilation = 1;

    static Conv2dLayer make(detail::Builder<T>& bld, int cin, int cout, int k, int stride = 1,
                            int dilation = 1, bool zero_init = false) {
        Conv2dLayer l;
        l.stride = stride;
        l.dilation = dilation;
        l.pad = dilation * (k - 1) / 2;
        if (zero_init) {
            l.w = Tensor<T>({cout, cin, k, k}, true);
            l.b = Tensor<T>({1, cout, 1, 1}, true);
        } else {
            l.w = bld.uniform({cout, cin, k, k}, cin * k * k);
            l.b = bld.uniform({1, cout, 1, 1}, cin * k * k);
        }
        return l;
    }

    Tensor<T> operator()(Tensor<T> x) const { return conv2d(x, w, b, stride, pad, dilation); }

    void visit(const std::string& prefix, const ParamVisitor<T>& v) {
        v(prefix + ".w", w);
        v(prefix + ".b", b);
    }
};

/// Three-level encoder-decoder feature extractor; base->2*base->4*base
/// channels, stride-2 downsampling, nearest upsampling, concat skips.
template <typename T>
struct UNet {
    Conv2dLayer<T> enc0, down1, down2, up1, dec1, up0, dec0, final;
    double slope = 0.1;
    int levels = 3;

    static UNet make(detail::Builder<T>& bld, int cin, int base, int cout, double slope,
                     int levels) {
        UNet u;
        u.slope = slope;
        u.levels = levels;
        u.enc0 = Conv2dLayer<T>::make(bld, cin, base, 3);
        u.down1 = Conv2dLayer<T>::make(bld, base, 2 * base, 3, 2);
        u.down2 = Conv2dLayer<T>::make(bld, 2 * base, 4 * base, 3, 2);
        u.up1 = Conv2dLayer<T>::make(bld, 4 * base, 2 * base, 3);
        u.dec1 = Conv2dLayer<T>::make(bld, 4 * base, 2 * base, 3);
        u.up0 = Conv2dLayer<T>::make(bld, 2 * base, base, 3);
        u.dec0 = Conv2dLayer<T>::make(bld, 2 * base, base, 3);
        u.final = Conv2dLayer<T>::make(bld, base, cout, 3);
        return u;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        const int mult = 1 << levels;
        if (x.dims().h % mult != 0 || x.dims().w % mult != 0)
            throw std::invalid_argument("unet: spatial dims " + x.dims().str() +
                                        " not divisible by " + std::to_string(mult));
        const T s = T(slope);
        auto e0 = leaky_relu(enc0(x), s);
        auto e1 = leaky_relu(down1(e0), s);
        auto e2 = leaky_relu(down2(e1), s);
        auto u1 = leaky_relu(up1(upsample_nearest2x(e2)), s);
        auto d1 = leaky_relu(dec1(concat_channels<T>({u1, e1})), s);
        auto u0 = leaky_relu(up0(upsample_nearest2x(d1)), s);
        auto d0 = leaky_relu(dec0(concat_channels<T>({u0, e0})), s);
        return final(d0);
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        enc0.visit(p + ".enc0", v);
        down1.visit(p + ".down1", v);
        down2.visit(p + ".down2", v);
        up1.visit(p + ".up1", v);
        dec1.visit(p + ".dec1", v);
        up0.visit(p + ".up0", v);
        dec0.visit(p + ".dec0", v);
        final.visit(p + ".final", v);
    }
};

/// One alignment branch: feature extraction, offset prediction and a
/// per-frame-grouped deformable convolution over the stacked group.
template <typename T>
struct IntraBranch {
    UNet<T> unet;
    Conv2dLayer<T> ocn;       // C -> 6*K^2, zero-initialized
    DeformKernel<T> dcn;      // 3 -> C, deform_groups = 3
    int kernel = 1;

    static IntraBranch make(detail::Builder<T>& bld, const ModelConfig& cfg, int kernel) {
        IntraBranch b;
        b.kernel = kernel;
        b.unet = UNet<T>::make(bld, 3, cfg.unet_base_channels(), cfg.channels, cfg.leaky_slope,
                               cfg.unet_levels);
        b.ocn = Conv2dLayer<T>::make(bld, cfg.channels, offset_channels(3, kernel), 3, 1, 1, true);
        b.dcn.weight = bld.uniform({cfg.channels, 3, kernel, kernel}, 3 * kernel * kernel);
        b.dcn.bias = bld.uniform({1, cfg.channels, 1, 1}, 3 * kernel * kernel);
        b.dcn.deform_groups = 3;
        return b;
    }

    Tensor<T> operator()(Tensor<T> stacked_group) const {
        auto offsets = ocn(unet(stacked_group));
        return dcn_forward(stacked_group, offsets, dcn);
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        unet.visit(p + ".unet", v);
        ocn.visit(p + ".ocn", v);
        v(p + ".dcn.w", dcn.weight);
        v(p + ".dcn.b", dcn.bias);
    }
};

template <typename T>
struct Rcab {
    Conv2dLayer<T> body1, body2, squeeze, excite;
    double slope = 0.1;

    static Rcab make(detail::Builder<T>& bld, int c, int reduction, double slope) {
        Rcab r;
        r.slope = slope;
        r.body1 = Conv2dLayer<T>::make(bld, c, c, 3);
        r.body2 = Conv2dLayer<T>::make(bld, c, c, 3);
        r.squeeze = Conv2dLayer<T>::make(bld, c, c / reduction, 1);
        r.excite = Conv2dLayer<T>::make(bld, c / reduction, c, 1);
        return r;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        auto t = body2(leaky_relu(body1(x), T(slope)));
        auto s = sigmoid(excite(leaky_relu(squeeze(global_avg_pool(t)), T(0))));
        return add(x, mul(t, s));
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        body1.visit(p + ".body1", v);
        body2.visit(p + ".body2", v);
        squeeze.visit(p + ".squeeze", v);
        excite.visit(p + ".excite", v);
    }
};

/// Contextual module: parallel 3x3 convolutions at dilation 1 and 2, summed.
template <typename T>
struct ContextualModule {
    Conv2dLayer<T> local, dilated;

    static ContextualModule make(detail::Builder<T>& bld, int c) {
        ContextualModule m;
        m.local = Conv2dLayer<T>::make(bld, c, c, 3, 1, 1);
        m.dilated = Conv2dLayer<T>::make(bld, c, c, 3, 1, 2);
        return m;
    }

    Tensor<T> operator()(Tensor<T> x) const { return add(local(x), dilated(x)); }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        local.visit(p + ".local", v);
        dilated.visit(p + ".dilated", v);
    }
};

/// Spatial dual contextual block: channel split, contextual modules on
/// both paths with a cross-path skip, concat and 3x3 re-fusion.
template <typename T>
struct Sdcb {
    ContextualModule<T> cm1, cm2;
    Conv2dLayer<T> fuse;
    double slope = 0.1;

    static Sdcb make(detail::Builder<T>& bld, int c, double slope) {
        Sdcb s;
        s.slope = slope;
        s.cm1 = ContextualModule<T>::make(bld, c / 2);
        s.cm2 = ContextualModule<T>::make(bld, c / 2);
        s.fuse = Conv2dLayer<T>::make(bld, c, c, 3);
        return s;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        auto halves = split_channels(x, 2);
        auto x1p = leaky_relu(cm1(halves[0]), T(slope));
        auto cf = add(x1p, halves[1]);
        auto cfp = leaky_relu(cm2(cf), T(slope));
        return fuse(concat_channels<T>({cfp, cf}));
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        cm1.visit(p + ".cm1", v);
        cm2.visit(p + ".cm2", v);
        fuse.visit(p + ".fuse", v);
    }
};

/// Gradual pairwise fusion of the three aligned group features, RCAB
/// refinement and a final per-channel-grouped 1x1 deformable pass.
template <typename T>
struct InterGff {
    Conv2dLayer<T> conv13, conv35, conv_merge;
    Rcab<T> rcab;
    Conv2dLayer<T> ocn;   // C -> 2*C, zero-initialized
    DeformKernel<T> dcn;  // C -> C, K=1, deform_groups = C
    double slope = 0.1;

    static InterGff make(detail::Builder<T>& bld, const ModelConfig& cfg) {
        const int c = cfg.channels;
        InterGff g;
        g.slope = cfg.leaky_slope;
        g.conv13 = Conv2dLayer<T>::make(bld, 2 * c, c, 3);
        g.conv35 = Conv2dLayer<T>::make(bld, 2 * c, c, 3);
        g.conv_merge = Conv2dLayer<T>::make(bld, 2 * c, c, 3);
        g.rcab = Rcab<T>::make(bld, c, cfg.rcab_reduction, cfg.leaky_slope);
        g.ocn = Conv2dLayer<T>::make(bld, c, offset_channels(c, 1), 3, 1, 1, true);
        g.dcn.weight = bld.uniform({c, c, 1, 1}, c);
        g.dcn.bias = bld.uniform({1, c, 1, 1}, c);
        g.dcn.deform_groups = c;
        return g;
    }

    Tensor<T> operator()(Tensor<T> f1, Tensor<T> f3, Tensor<T> f5) const {
        const T s = T(slope);
        auto f13 = leaky_relu(conv13(concat_channels<T>({f1, f3})), s);
        auto f35 = leaky_relu(conv35(concat_channels<T>({f3, f5})), s);
        auto fused = rcab(leaky_relu(conv_merge(concat_channels<T>({f13, f35})), s));
        return dcn_forward(fused, ocn(fused), dcn);
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        conv13.visit(p + ".conv13", v);
        conv35.visit(p + ".conv35", v);
        conv_merge.visit(p + ".conv_merge", v);
        rcab.visit(p + ".rcab", v);
        ocn.visit(p + ".ocn", v);
        v(p + ".dcn.w", dcn.weight);
        v(p + ".dcn.b", dcn.bias);
    }
};

/// Feature-enhancement head: conv, [SDCB, conv] x L, then a 3x3
/// projection to the single-channel luma residual.
template <typename T>
struct FeHead {
    Conv2dLayer<T> head;
    std::vector<Sdcb<T>> sdcbs;
    std::vector<Conv2dLayer<T>> convs;  // one after each SDCB
    Conv2dLayer<T> tail;
    double slope = 0.1;

    static FeHead make(detail::Builder<T>& bld, const ModelConfig& cfg) {
        const int c = cfg.channels;
        FeHead f;
        f.slope = cfg.leaky_slope;
        f.head = Conv2dLayer<T>::make(bld, c, c, 3);
        for (int i = 0; i < cfg.sdcb_count; ++i) {
            f.sdcbs.push_back(Sdcb<T>::make(bld, c, cfg.leaky_slope));
            f.convs.push_back(Conv2dLayer<T>::make(bld, c, c, 3));
        }
        f.tail = Conv2dLayer<T>::make(bld, c, 1, 3);
        return f;
    }

    Tensor<T> operator()(Tensor<T> x) const {
        const T s = T(slope);
        auto f = leaky_relu(head(x), s);
        for (size_t i = 0; i < sdcbs.size(); ++i) f = leaky_relu(convs[i](sdcbs[i](f)), s);
        return tail(f);
    }

    void visit(const std::string& p, const ParamVisitor<T>& v) {
        head.visit(p + ".head", v);
        for (size_t i = 0; i < sdcbs.size(); ++i) {
            sdcbs[i].visit(p + ".sdcb" + std::to_string(i), v);
            convs[i].visit(p + ".conv" + std::to_string(i), v);
        }
        tail.visit(p + ".tail", v);
    }
};

template <typename T>
struct TgafModel {
    ModelConfig config;
    std::vector<IntraBranch<T>> branches;
    InterGff<T> fusion;
    FeHead<T> fe;

    void visit_params(const ParamVisitor<T>& v) {
        for (size_t i = 0; i < branches.size(); ++i)
            branches[i].visit("g" + std::to_string(i + 1), v);
        fusion.visit("gff", v);
        fe.visit("fe", v);
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        visit_params([&](const std::string&, Tensor<T>& t) { n += t.count(); });
        return n;
    }

    void zero_grads() {
        visit_params([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
    }
};

template <typename T>
TgafModel<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    detail::Builder<T> bld{std::mt19937_64(seed)};
    TgafModel<T> m;
    m.config = cfg;
    for (int g = 0; g < cfg.groups; ++g)
        m.branches.push_back(IntraBranch<T>::make(bld, cfg, cfg.kernel_sizes[g]));
    m.fusion = InterGff<T>::make(bld, cfg);
    m.fe = FeHead<T>::make(bld, cfg);
    return m;
}

namespace detail {

// Stack a batch of frame triples into a [B,3,Hp,Wp] leaf, reflect-padded
// on the bottom/right to the next multiple of `mult`.
template <typename T>
Tensor<T> stack_group(std::span<const GoPWindow> windows, int group, int hp, int wp) {
    const int b = int(windows.size());
    Tensor<T> t({b, 3, hp, wp});
    for (int n = 0; n < b; ++n) {
        auto frames = windows[n].group(group);
        for (int c = 0; c < 3; ++c) {
            const FrameY& f = *frames[c];
            for (int y = 0; y < hp; ++y) {
                const int sy = y < f.h ? y : 2 * f.h - 2 - y;
                for (int x = 0; x < wp; ++x) {
                    const int sx = x < f.w ? x : 2 * f.w - 2 - x;
                    t.at(n, c, y, x) = T(f.at(sy, sx));
                }
            }
        }
    }
    return t;
}

}  // namespace detail

/// Full enhancement pass over a batch of 7-frame windows; returns the
/// enhanced target frames [B,1,H,W] = residual + I_k.
template <typename T>
Tensor<T> forward_batch(std::span<const GoPWindow> windows, const TgafModel<T>& model) {
    if (windows.empty()) throw std::invalid_argument("forward: empty batch");
    const FrameY& f0 = windows[0].target();
    const int h = f0.h, w = f0.w;
    for (const auto& win : windows)
        for (const auto& f : win.frames)
            if (f.h != h || f.w != w)
                throw std::invalid_argument("forward: frames must share dimensions");
    const int mult = model.config.pad_multiple();
    if (h < 2 || w < 2) throw std::invalid_argument("forward: frames too small");
    const int hp = (h + mult - 1) / mult * mult;
    const int wp = (w + mult - 1) / mult * mult;

    std::vector<Tensor<T>> aligned;
    for (int g = 0; g < model.config.groups; ++g) {
        auto stacked = detail::stack_group<T>(windows, g + 1, hp, wp);
        aligned.push_back(model.branches[g](stacked));
    }
    auto fused = model.fusion(aligned[0], aligned[1], aligned[2]);
    auto residual = model.fe(fused);
    if (hp != h || wp != w) residual = crop_spatial(residual, 0, 0, h, w);

    Tensor<T> target({int(windows.size()), 1, h, w});
    for (size_t n = 0; n < windows.size(); ++n) {
        const FrameY& f = windows[n].target();
        std::copy(f.v.begin(), f.v.end(),
                  target.data().begin() + std::int64_t(n) * h * w);
    }
    return add(residual, target);
}

template <typename T>
Tensor<T> forward(const GoPWindow& window, const TgafModel<T>& model) {
    return forward_batch(std::span<const GoPWindow>(&window, 1), model);
}

}  // namespace tgaf
