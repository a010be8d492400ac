#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgaf/data.hpp"

namespace tgaf {

inline constexpr double kPsnrCap = 100.0;

inline double psnr(const FrameY& a, const FrameY& b) {
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument("psnr: frame dimensions differ");
    double mse = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = double(a.v[i]) - double(b.v[i]);
        mse += d * d;
    }
    mse /= double(a.v.size());
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline const std::vector<double>& ssim_window_1d() {
    static const std::vector<double> g = [] {
        std::vector<double> v(11);
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            const double d = i - 5;
            v[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += v[i];
        }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return g;
}

// Valid-mode separable filtering with the 11-tap Gaussian.
inline std::vector<double> gauss_filter_valid(const std::vector<double>& img, int h, int w,
                                              int& oh, int& ow) {
    const auto& g = ssim_window_1d();
    oh = h - 10;
    ow = w - 10;
    std::vector<double> rows(std::size_t(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < 11; ++k) s += g[k] * img[std::size_t(y) * w + x + k];
            rows[std::size_t(y) * ow + x] = s;
        }
    std::vector<double> out(std::size_t(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int k = 0; k < 11; ++k) s += g[k] * rows[std::size_t(y + k) * ow + x];
            out[std::size_t(y) * ow + x] = s;
        }
    return out;
}

}  // namespace detail

/// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, unit dynamic range.
inline double ssim(const FrameY& a, const FrameY& b) {
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument("ssim: frame dimensions differ");
    if (a.h < 11 || a.w < 11)
        throw std::invalid_argument("ssim: frames must be at least 11x11");
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const size_t count = a.v.size();
    std::vector<double> x(count), y(count), xx(count), yy(count), xy(count);
    for (size_t i = 0; i < count; ++i) {
        x[i] = a.v[i];
        y[i] = b.v[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    int oh = 0, ow = 0;
    auto mx = detail::gauss_filter_valid(x, a.h, a.w, oh, ow);
    auto my = detail::gauss_filter_valid(y, a.h, a.w, oh, ow);
    auto mxx = detail::gauss_filter_valid(xx, a.h, a.w, oh, ow);
    auto myy = detail::gauss_filter_valid(yy, a.h, a.w, oh, ow);
    auto mxy = detail::gauss_filter_valid(xy, a.h, a.w, oh, ow);
    double acc = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return acc / double(mx.size());
}

struct QualityReport {
    std::vector<double> psnr_degraded, psnr_enhanced;
    std::vector<double> ssim_degraded, ssim_enhanced;
    double mean_psnr_degraded = 0, mean_psnr_enhanced = 0;
    double mean_ssim_degraded = 0, mean_ssim_enhanced = 0;
    double delta_psnr = 0, delta_ssim = 0;

    // The SSIM delta is conventionally quoted in units of 1e-4.
    double delta_ssim_x1e4() const { return delta_ssim * 1e4; }

    void print_text(std::ostream& os) const {
        for (size_t i = 0; i < psnr_degraded.size(); ++i)
            os << "frame " << i << ": psnr_degraded=" << psnr_degraded[i]
               << " psnr_enhanced=" << psnr_enhanced[i] << " ssim_degraded=" << ssim_degraded[i]
               << " ssim_enhanced=" << ssim_enhanced[i] << "\n";
        print_kv(os);
    }
    void print_kv(std::ostream& os) const {
        os << "mean_psnr_degraded=" << mean_psnr_degraded << "\n"
           << "mean_psnr_enhanced=" << mean_psnr_enhanced << "\n"
           << "mean_ssim_degraded=" << mean_ssim_degraded << "\n"
           << "mean_ssim_enhanced=" << mean_ssim_enhanced << "\n"
           << "delta_psnr=" << delta_psnr << "\n"
           << "delta_ssim=" << delta_ssim << "\n"
           << "delta_ssim_x1e4=" << delta_ssim_x1e4() << "\n";
    }
};

inline QualityReport delta_report(const std::vector<FrameY>& raw,
                                  const std::vector<FrameY>& degraded,
                                  const std::vector<FrameY>& enhanced) {
    if (raw.size() != degraded.size() || raw.size() != enhanced.size())
        throw std::invalid_argument("delta_report: sequence lengths differ");
    if (raw.empty()) throw std::invalid_argument("delta_report: empty sequences");
    QualityReport r;
    for (size_t i = 0; i < raw.size(); ++i) {
        r.psnr_degraded.push_back(psnr(degraded[i], raw[i]));
        r.psnr_enhanced.push_back(psnr(enhanced[i], raw[i]));
        r.ssim_degraded.push_back(ssim(degraded[i], raw[i]));
        r.ssim_enhanced.push_back(ssim(enhanced[i], raw[i]));
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    r.mean_psnr_degraded = mean(r.psnr_degraded);
    r.mean_psnr_enhanced = mean(r.psnr_enhanced);
    r.mean_ssim_degraded = mean(r.ssim_degraded);
    r.mean_ssim_enhanced = mean(r.ssim_enhanced);
    r.delta_psnr = r.mean_psnr_enhanced - r.mean_psnr_degraded;
    r.delta_ssim = r.mean_ssim_enhanced - r.mean_ssim_degraded;
    return r;
}

}  // namespace tgaf
