#pragma once

#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>

#include "tgaf/model.hpp"
#include "tgaf/video_io.hpp"

namespace tgaf {

template <typename T>
Tensor<T> charbonnier_loss(Tensor<T> pred, Tensor<T> target, T eps) {
    if (!(pred.dims() == target.dims())) shape_error("charbonnier_loss", pred.dims(), target.dims());
    if (!(eps > 0)) throw std::invalid_argument("charbonnier_loss: eps must be positive");
    Tensor<T> out = Tensor<T>::make_result({1, 1, 1, 1}, {pred, target});
    const std::int64_t count = pred.count();
    // extended-precision accumulation keeps the mean of identical terms
    // exact (the loss floor at pred == target is exactly eps)
    long double acc = 0;
    for (std::int64_t i = 0; i < count; ++i) {
        const T d = pred.data()[i] - target.data()[i];
        acc += std::sqrt(d * d + eps * eps);
    }
    out.data()[0] = T(acc / (long double)count);
    auto* self = out.node().get();
    out.set_backward([self, pred, target, eps, count]() mutable {
        const T g = self->grad[0] / T(count);
        for (std::int64_t i = 0; i < count; ++i) {
            const T d = pred.data()[i] - target.data()[i];
            const T dd = g * d / std::sqrt(d * d + eps * eps);
            if (pred.requires_grad()) pred.grad()[i] += dd;
            if (target.requires_grad()) target.grad()[i] -= dd;
        }
    });
    return out;
}

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    double charbonnier_eps = 1e-3;
    int batch_size = 32;
    long total_iters = 300000;
    int patch_size = 128;
    long ckpt_interval = 500;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr > 0) || !(adam_eps > 0) || !(charbonnier_eps > 0))
            throw std::invalid_argument("train config: lr and eps values must be positive");
        if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
            throw std::invalid_argument("train config: betas must be in [0,1)");
        if (batch_size < 1 || total_iters < 0 || patch_size < 8)
            throw std::invalid_argument("train config: invalid batch/iters/patch");
    }

    static TrainConfig smoke() {
        TrainConfig c;
        c.batch_size = 4;
        c.total_iters = 2000;
        c.patch_size = 64;
        c.lr = 1e-3;
        return c;
    }
};

template <typename T>
struct NamedParams {
    std::vector<std::string> names;
    std::vector<Tensor<T>> tensors;  // aliases into the model
};

template <typename T>
NamedParams<T> collect_params(TgafModel<T>& model) {
    NamedParams<T> p;
    model.visit_params([&](const std::string& name, Tensor<T>& t) {
        p.names.push_back(name);
        p.tensors.push_back(t);
    });
    return p;
}

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::uint64_t t = 0;

    static AdamState for_params(const NamedParams<T>& p) {
        AdamState s;
        for (const auto& t : p.tensors) {
            s.m.emplace_back(t.count(), T(0));
            s.v.emplace_back(t.count(), T(0));
        }
        return s;
    }
};

template <typename T>
void adam_step(NamedParams<T>& params, AdamState<T>& state, const TrainConfig& cfg) {
    if (state.m.size() != params.tensors.size())
        throw std::invalid_argument("adam_step: state does not match parameter list");
    state.t += 1;
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
    const T corr1 = T(1) - std::pow(b1, T(state.t));
    const T corr2 = T(1) - std::pow(b2, T(state.t));
    const T lr = T(cfg.lr), eps = T(cfg.adam_eps);
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        Tensor<T>& p = params.tensors[i];
        if (!p.has_grad())
            throw std::invalid_argument("adam_step: missing gradient for parameter " +
                                        params.names[i]);
        auto& g = p.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        auto& w = p.data();
        for (size_t j = 0; j < w.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const T mh = m[j] / corr1;
            const T vh = v[j] / corr2;
            w[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint serialization: magic "TGAF", u32 version, config block,
// iteration, named f32 tensor records, optional Adam state.

inline constexpr char kCkptMagic[4] = {'T', 'G', 'A', 'F'};
inline constexpr std::uint32_t kCkptVersion = 1;

namespace detail {

template <typename V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V get(std::istream& is, const char* what) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

inline void put_floats(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), std::int64_t(v.size()) * 4);
}
inline void get_floats(std::istream& is, std::vector<float>& v, const char* what) {
    is.read(reinterpret_cast<char*>(v.data()), std::int64_t(v.size()) * 4);
    if (!is) throw FormatError(std::string("checkpoint: truncated while reading ") + what);
}

}  // namespace detail

struct Checkpoint {
    ModelConfig config;
    std::uint64_t iteration = 0;
    TgafModel<float> model;
    std::optional<AdamState<float>> adam;
};

inline void save_checkpoint(TgafModel<float>& model, std::uint64_t iteration,
                            const AdamState<float>* adam, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("checkpoint: cannot open " + path + " for writing");
    os.write(kCkptMagic, 4);
    detail::put<std::uint32_t>(os, kCkptVersion);
    const ModelConfig& c = model.config;
    detail::put<std::int32_t>(os, c.groups);
    detail::put<std::int32_t>(os, c.channels);
    detail::put<std::int32_t>(os, c.sdcb_count);
    detail::put<std::int32_t>(os, c.rcab_reduction);
    detail::put<std::int32_t>(os, c.unet_levels);
    detail::put<std::int32_t>(os, c.unet_base);
    detail::put<double>(os, c.leaky_slope);
    detail::put<std::uint32_t>(os, std::uint32_t(c.kernel_sizes.size()));
    for (int k : c.kernel_sizes) detail::put<std::int32_t>(os, k);
    detail::put<std::uint64_t>(os, iteration);

    auto params = collect_params(model);
    detail::put<std::uint32_t>(os, std::uint32_t(params.tensors.size()));
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        const std::string& name = params.names[i];
        detail::put<std::uint32_t>(os, std::uint32_t(name.size()));
        os.write(name.data(), std::int64_t(name.size()));
        detail::put<std::uint32_t>(os, 4);  // rank
        const Dims& d = params.tensors[i].dims();
        for (int dim : {d.n, d.c, d.h, d.w}) detail::put<std::uint32_t>(os, std::uint32_t(dim));
        detail::put_floats(os, params.tensors[i].data());
    }
    detail::put<std::uint8_t>(os, adam ? 1 : 0);
    if (adam) {
        detail::put<std::uint64_t>(os, adam->t);
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            detail::put_floats(os, adam->m[i]);
            detail::put_floats(os, adam->v[i]);
        }
    }
    if (!os) throw FormatError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const auto version = detail::get<std::uint32_t>(is, "version");
    if (version != kCkptVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    ModelConfig c;
    c.groups = detail::get<std::int32_t>(is, "config.groups");
    c.channels = detail::get<std::int32_t>(is, "config.channels");
    c.sdcb_count = detail::get<std::int32_t>(is, "config.sdcb_count");
    c.rcab_reduction = detail::get<std::int32_t>(is, "config.rcab_reduction");
    c.unet_levels = detail::get<std::int32_t>(is, "config.unet_levels");
    c.unet_base = detail::get<std::int32_t>(is, "config.unet_base");
    c.leaky_slope = detail::get<double>(is, "config.leaky_slope");
    const auto nk = detail::get<std::uint32_t>(is, "config.kernel_count");
    if (nk > 16) throw FormatError("checkpoint: implausible kernel count");
    c.kernel_sizes.clear();
    for (std::uint32_t i = 0; i < nk; ++i)
        c.kernel_sizes.push_back(detail::get<std::int32_t>(is, "config.kernel"));

    Checkpoint ck;
    ck.config = c;
    ck.iteration = detail::get<std::uint64_t>(is, "iteration");
    ck.model = build_model<float>(c, 0);
    auto params = collect_params(ck.model);

    const auto count = detail::get<std::uint32_t>(is, "tensor count");
    if (count != params.tensors.size())
        throw FormatError("checkpoint: tensor count " + std::to_string(count) +
                          " does not match the model (" + std::to_string(params.tensors.size()) +
                          ")");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = detail::get<std::uint32_t>(is, "name length");
        if (name_len > 4096) throw FormatError("checkpoint: implausible name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError("checkpoint: truncated while reading name");
        if (name != params.names[i])
            throw FormatError("checkpoint: unexpected tensor '" + name + "', expected '" +
                              params.names[i] + "'");
        const auto rank = detail::get<std::uint32_t>(is, "rank");
        if (rank != 4) throw FormatError("checkpoint: unsupported tensor rank");
        Dims d;
        d.n = int(detail::get<std::uint32_t>(is, "dim"));
        d.c = int(detail::get<std::uint32_t>(is, "dim"));
        d.h = int(detail::get<std::uint32_t>(is, "dim"));
        d.w = int(detail::get<std::uint32_t>(is, "dim"));
        if (!(d == params.tensors[i].dims()))
            throw FormatError("checkpoint: dims " + d.str() + " for '" + name +
                              "' do not match the model " + params.tensors[i].dims().str());
        detail::get_floats(is, params.tensors[i].data(), name.c_str());
    }
    const auto has_adam = detail::get<std::uint8_t>(is, "adam flag");
    if (has_adam) {
        AdamState<float> st = AdamState<float>::for_params(params);
        st.t = detail::get<std::uint64_t>(is, "adam step");
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            detail::get_floats(is, st.m[i], "adam m");
            detail::get_floats(is, st.v[i], "adam v");
        }
        ck.adam = std::move(st);
    }
    return ck;
}

// ---------------------------------------------------------------------------

struct TrainData {
    std::vector<FrameY> raw;
    std::vector<FrameY> lq;
};

/// Deterministic Charbonnier/Adam training loop. Emits one
/// "iter=<n> loss=<f>" record per iteration and periodic checkpoints.
inline Checkpoint train_loop(TgafModel<float>& model, const TrainData& data,
                             const TrainConfig& cfg, const std::string& ckpt_path,
                             std::ostream& log) {
    cfg.validate();
    if (data.raw.size() != data.lq.size() || data.raw.empty())
        throw std::invalid_argument("train: raw and degraded sequences must be non-empty and equal");
    auto params = collect_params(model);
    AdamState<float> state = AdamState<float>::for_params(params);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick_frame(0, int(data.raw.size()) - 1);
    std::uniform_int_distribution<int> pick_code(0, 7);

    const int ps = cfg.patch_size;
    for (long it = 1; it <= cfg.total_iters; ++it) {
        std::vector<GoPWindow> batch;
        Tensor<float> target({cfg.batch_size, 1, ps, ps});
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int k = pick_frame(rng);
            GoPWindow win = window(data.lq, k);
            PatchPair pair = crop_patches(win, data.raw[k], ps, rng(), 1)[0];
            pair = augment(pair, pick_code(rng));
            GoPWindow pw;
            for (int f = 0; f < 7; ++f) pw.frames[f] = pair.lq[f];
            batch.push_back(std::move(pw));
            std::copy(pair.hq.v.begin(), pair.hq.v.end(),
                      target.data().begin() + std::int64_t(b) * ps * ps);
        }
        auto pred = forward_batch<float>(batch, model);
        auto loss = charbonnier_loss(pred, target, float(cfg.charbonnier_eps));
        const float lv = loss.data()[0];
        if (!std::isfinite(lv))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it));
        log << "iter=" << it << " loss=" << std::setprecision(9) << lv << "\n";
        backward(loss);
        adam_step(params, state, cfg);
        model.zero_grads();
        if (cfg.ckpt_interval > 0 && it % cfg.ckpt_interval == 0 && !ckpt_path.empty())
            save_checkpoint(model, std::uint64_t(it), &state, ckpt_path);
    }
    if (!ckpt_path.empty())
        save_checkpoint(model, std::uint64_t(cfg.total_iters), &state, ckpt_path);
    Checkpoint ck;
    ck.config = model.config;
    ck.iteration = std::uint64_t(cfg.total_iters);
    ck.model = model;
    ck.adam = state;
    return ck;
}

}  // namespace tgaf
