#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgaf {

/// One luma plane, values normalized to [0,1].
struct FrameY {
    int h = 0, w = 0;
    std::vector<float> v;

    FrameY() = default;
    FrameY(int h_, int w_) : h(h_), w(w_), v(std::size_t(h_) * w_, 0.f) {}
    float& at(int y, int x) { return v[std::size_t(y) * w + x]; }
    float at(int y, int x) const { return v[std::size_t(y) * w + x]; }
};

/// The 7-frame temporal window around a target frame, index 3 being the
/// target. Group i pairs the target with its neighbors at distance i.
struct GoPWindow {
    static constexpr int kHalfSpan = 3;
    std::array<FrameY, 2 * kHalfSpan + 1> frames;
    int target_index = kHalfSpan;

    const FrameY& target() const { return frames[target_index]; }
    // {I_{k-i}, I_k, I_{k+i}}
    std::array<const FrameY*, 3> group(int i) const {
        if (i < 1 || i > kHalfSpan)
            throw std::invalid_argument("group index must be in 1..3, got " + std::to_string(i));
        return {&frames[target_index - i], &frames[target_index], &frames[target_index + i]};
    }
};

/// Temporal window with edge replication at sequence boundaries.
inline GoPWindow window(const std::vector<FrameY>& sequence, int k, int half_span = 3) {
    if (sequence.empty()) throw std::invalid_argument("window: empty sequence");
    if (k < 0 || k >= int(sequence.size()))
        throw std::invalid_argument("window: frame index " + std::to_string(k) + " out of range");
    if (half_span != GoPWindow::kHalfSpan)
        throw std::invalid_argument("window: only half-span 3 (7 frames) is supported");
    GoPWindow win;
    for (int i = -half_span; i <= half_span; ++i) {
        const int j = std::clamp(k + i, 0, int(sequence.size()) - 1);
        win.frames[i + half_span] = sequence[j];
    }
    return win;
}

/// Co-located LQ window patches plus the raw target patch.
struct PatchPair {
    std::array<FrameY, 7> lq;
    FrameY hq;
};

inline FrameY crop_frame(const FrameY& f, int top, int left, int size) {
    FrameY out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(y, x) = f.at(top + y, left + x);
    return out;
}

inline std::vector<PatchPair> crop_patches(const GoPWindow& lq_window, const FrameY& hq_frame,
                                           int size, std::uint64_t seed, int count = 1) {
    const FrameY& ref = lq_window.frames[0];
    if (ref.h < size || ref.w < size)
        throw std::invalid_argument("crop_patches: frame " + std::to_string(ref.w) + "x" +
                                    std::to_string(ref.h) + " smaller than patch size " +
                                    std::to_string(size));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dt(0, ref.h - size), dl(0, ref.w - size);
    std::vector<PatchPair> out;
    for (int i = 0; i < count; ++i) {
        const int top = dt(rng), left = dl(rng);
        PatchPair p;
        for (int f = 0; f < 7; ++f) p.lq[f] = crop_frame(lq_window.frames[f], top, left, size);
        p.hq = crop_frame(hq_frame, top, left, size);
        out.push_back(std::move(p));
    }
    return out;
}

namespace detail {

inline FrameY dihedral(const FrameY& f, int code) {
    if (f.h != f.w) throw std::invalid_argument("augment: patches must be square");
    const int n = f.h;
    FrameY out(n, n);
    const int rot = code & 3;
    const bool flip = (code & 4) != 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            int sy = y, sx = x;
            if (flip) sx = n - 1 - sx;  // horizontal flip
            for (int r = 0; r < rot; ++r) {  // rotate 90 deg CCW per step
                const int ty = n - 1 - sx, tx = sy;
                sy = ty;
                sx = tx;
            }
            out.at(y, x) = f.at(sy, sx);
        }
    return out;
}

}  // namespace detail

/// Dihedral-group augmentation: code&3 quarter-turns, code&4 horizontal
/// flip, applied identically to all 8 patches.
inline PatchPair augment(const PatchPair& pair, int code) {
    if (code < 0 || code > 7) throw std::invalid_argument("augment: code must be in 0..7");
    PatchPair out;
    for (int f = 0; f < 7; ++f) out.lq[f] = detail::dihedral(pair.lq[f], code);
    out.hq = detail::dihedral(pair.hq, code);
    return out;
}

namespace detail {

// Orthonormal 8x8 DCT-II basis.
struct Dct8 {
    std::array<std::array<double, 8>, 8> basis{};
    Dct8() {
        for (int u = 0; u < 8; ++u) {
            const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                basis[u][x] = a * std::cos((2 * x + 1) * u * M_PI / 16.0);
        }
    }
};

inline const Dct8& dct8() {
    static const Dct8 d;
    return d;
}

}  // namespace detail

inline int degrade_quant_step(int strength) {
    static constexpr int steps[5] = {2, 4, 8, 16, 32};
    if (strength < 1 || strength > 5)
        throw std::invalid_argument("degrade: strength must be in 1..5");
    return steps[strength - 1];
}

/// Blockwise DCT quantization proxy for codec compression. Quantizer step
/// grows along the zig-zag diagonals; strength selects the base step.
/// Pass strength 0 for the transform round trip without quantization.
inline FrameY synthetic_degrade_frame(const FrameY& f, int strength) {
    const double q = strength == 0 ? 0.0 : double(degrade_quant_step(strength));
    const auto& dct = detail::dct8();
    FrameY out(f.h, f.w);
    double block[8][8], tmp[8][8], coef[8][8];
    for (int by = 0; by < f.h; by += 8)
        for (int bx = 0; bx < f.w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    const int sy = std::min(by + y, f.h - 1), sx = std::min(bx + x, f.w - 1);
                    block[y][x] = 255.0 * f.at(sy, sx);
                }
            // separable forward DCT
            for (int u = 0; u < 8; ++u)
                for (int x = 0; x < 8; ++x) {
                    double s = 0;
                    for (int y = 0; y < 8; ++y) s += dct.basis[u][y] * block[y][x];
                    tmp[u][x] = s;
                }
            for (int u = 0; u < 8; ++u)
                for (int v2 = 0; v2 < 8; ++v2) {
                    double s = 0;
                    for (int x = 0; x < 8; ++x) s += dct.basis[v2][x] * tmp[u][x];
                    coef[u][v2] = s;
                }
            if (q > 0) {
                for (int u = 0; u < 8; ++u)
                    for (int v2 = 0; v2 < 8; ++v2) {
                        const double step = q * (1.0 + 0.5 * (u + v2));
                        coef[u][v2] = std::round(coef[u][v2] / step) * step;
                    }
            }
            // inverse
            for (int u = 0; u < 8; ++u)
                for (int x = 0; x < 8; ++x) {
                    double s = 0;
                    for (int v2 = 0; v2 < 8; ++v2) s += dct.basis[v2][x] * coef[u][v2];
                    tmp[u][x] = s;
                }
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    double s = 0;
                    for (int u = 0; u < 8; ++u) s += dct.basis[u][y] * tmp[u][x];
                    if (by + y < f.h && bx + x < f.w)
                        out.at(by + y, bx + x) =
                            float(std::clamp(s / 255.0, 0.0, 1.0));
                }
        }
    return out;
}

inline std::vector<FrameY> synthetic_degrade(const std::vector<FrameY>& frames, int strength) {
    std::vector<FrameY> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(synthetic_degrade_frame(f, strength));
    return out;
}

}  // namespace tgaf
