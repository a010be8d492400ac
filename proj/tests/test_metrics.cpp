#include <doctest.h>

#include <random>

#include "tgaf/metrics.hpp"

using namespace tgaf;

namespace {

FrameY random_frame(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(0.f, 1.f);
    FrameY f(h, w);
    for (auto& v : f.v) v = dist(rng);
    return f;
}

// Brute-force oracle: per-window weighted statistics computed from
// scratch with the non-separable 2-D window.
double ssim_oracle(const FrameY& a, const FrameY& b) {
    std::vector<std::vector<double>> win(11, std::vector<double>(11));
    double wsum = 0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
            const double dy = y - 5, dx = x - 5;
            win[y][x] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            wsum += win[y][x];
        }
    for (auto& row : win)
        for (auto& v : row) v /= wsum;

    constexpr double c1 = 1e-4, c2 = 9e-4;
    double acc = 0;
    int count = 0;
    for (int top = 0; top + 11 <= a.h; ++top)
        for (int left = 0; left + 11 <= a.w; ++left) {
            double mx = 0, my = 0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) {
                    mx += win[y][x] * a.at(top + y, left + x);
                    my += win[y][x] * b.at(top + y, left + x);
                }
            double vx = 0, vy = 0, cov = 0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) {
                    const double da = a.at(top + y, left + x) - mx;
                    const double db = b.at(top + y, left + x) - my;
                    vx += win[y][x] * da * da;
                    vy += win[y][x] * db * db;
                    cov += win[y][x] * da * db;
                }
            acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return acc / count;
}

double psnr_oracle(const FrameY& a, const FrameY& b) {
    double se = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = double(a.v[i]) - double(b.v[i]);
        se += d * d;
    }
    const double mse = se / double(a.v.size());
    return mse == 0 ? 100.0 : 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_CASE("psnr values and cap") {
    auto f = random_frame(16, 16, 1);
    CHECK(psnr(f, f) == 100.0);

    FrameY a(10, 10), b(10, 10);
    std::fill(b.v.begin(), b.v.end(), 1.f);
    CHECK(psnr(a, b) == doctest::Approx(0.0));  // MSE 1

    // MSE 0.01 -> 20 dB
    FrameY c(10, 10), d(10, 10);
    std::fill(d.v.begin(), d.v.end(), 0.1f);
    CHECK(psnr(c, d) == doctest::Approx(20.0).epsilon(1e-6));

    FrameY e(4, 4);
    CHECK_THROWS_AS(psnr(a, e), std::invalid_argument);
}

TEST_CASE("psnr is symmetric and decreasing in mse") {
    auto a = random_frame(20, 20, 2);
    auto b = random_frame(20, 20, 3);
    CHECK(psnr(a, b) == psnr(b, a));
    FrameY worse = b;
    for (auto& v : worse.v) v = std::clamp(v + 0.1f, 0.f, 1.f);
    // larger perturbation of the same sign lowers psnr vs a milder one
    FrameY mild = a;
    mild.v[0] += 0.01f;
    FrameY strong = a;
    strong.v[0] += 0.2f;
    CHECK(psnr(a, strong) < psnr(a, mild));
}

TEST_CASE("psnr matches the direct oracle on random pairs") {
    for (int i = 0; i < 10; ++i) {
        CAPTURE(i);
        auto a = random_frame(24, 31, 100 + i);
        auto b = random_frame(24, 31, 200 + i);
        CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-6);
    }
}

TEST_CASE("ssim of identical frames is exactly 1") {
    auto f = random_frame(16, 20, 4);
    CHECK(ssim(f, f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim degrades under structural inversion") {
    auto a = random_frame(24, 24, 5);
    float mean = 0;
    for (float v : a.v) mean += v;
    mean /= float(a.v.size());
    FrameY inv(24, 24);
    for (size_t i = 0; i < a.v.size(); ++i) inv.v[i] = 2 * mean - a.v[i];
    CHECK(ssim(a, inv) < 1.0);
    CHECK(ssim(a, inv) < ssim(a, a));
}

TEST_CASE("ssim matches the brute-force sliding-window oracle") {
    for (int i = 0; i < 10; ++i) {
        CAPTURE(i);
        auto a = random_frame(32, 32, 300 + i);
        FrameY b = a;
        std::mt19937_64 rng(400 + i);
        std::normal_distribution<float> noise(0.f, 0.05f);
        for (auto& v : b.v) v = std::clamp(v + noise(rng), 0.f, 1.f);
        CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-4);
    }
}

TEST_CASE("ssim rejects too-small frames") {
    FrameY tiny(8, 8);
    CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("delta_report basics") {
    std::vector<FrameY> raw, degraded;
    for (int i = 0; i < 3; ++i) {
        raw.push_back(random_frame(16, 16, 500 + i));
        FrameY d = raw.back();
        for (auto& v : d.v) v = std::clamp(v + 0.02f * ((i % 2) ? 1 : -1), 0.f, 1.f);
        degraded.push_back(std::move(d));
    }
    auto same = delta_report(raw, degraded, degraded);
    CHECK(same.delta_psnr == doctest::Approx(0.0));
    CHECK(same.delta_ssim == doctest::Approx(0.0));

    auto perfect = delta_report(raw, degraded, raw);
    CHECK(perfect.delta_psnr == doctest::Approx(100.0 - same.mean_psnr_degraded));
    CHECK(perfect.delta_ssim_x1e4() == doctest::Approx(perfect.delta_ssim * 1e4));

    std::vector<FrameY> short_seq(raw.begin(), raw.begin() + 2);
    CHECK_THROWS_AS(delta_report(raw, degraded, short_seq), std::invalid_argument);
}

TEST_CASE("delta_report is invariant to a common reordering") {
    std::vector<FrameY> raw, degraded, enhanced;
    for (int i = 0; i < 4; ++i) {
        raw.push_back(random_frame(16, 16, 600 + i));
        degraded.push_back(random_frame(16, 16, 700 + i));
        enhanced.push_back(random_frame(16, 16, 800 + i));
    }
    auto r1 = delta_report(raw, degraded, enhanced);
    std::vector<int> order = {2, 0, 3, 1};
    std::vector<FrameY> raw2, deg2, enh2;
    for (int i : order) {
        raw2.push_back(raw[i]);
        deg2.push_back(degraded[i]);
        enh2.push_back(enhanced[i]);
    }
    auto r2 = delta_report(raw2, deg2, enh2);
    CHECK(r1.delta_psnr == doctest::Approx(r2.delta_psnr).epsilon(1e-12));
    CHECK(r1.delta_ssim == doctest::Approx(r2.delta_ssim).epsilon(1e-12));
}
