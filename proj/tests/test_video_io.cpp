#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "tgaf/video_io.hpp"

using namespace tgaf;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

VideoSequence random_video(int frames, int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    VideoSequence seq;
    seq.width = w;
    seq.height = h;
    for (int f = 0; f < frames; ++f) {
        std::vector<std::uint8_t> y(std::size_t(w) * h), u(std::size_t(w) * h / 4),
            v(std::size_t(w) * h / 4);
        for (auto& b : y) b = std::uint8_t(byte(rng));
        for (auto& b : u) b = std::uint8_t(byte(rng));
        for (auto& b : v) b = std::uint8_t(byte(rng));
        seq.y.push_back(std::move(y));
        seq.u.push_back(std::move(u));
        seq.v.push_back(std::move(v));
    }
    return seq;
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("yuv420 frame size accounting") {
    const auto path = temp_path("tgaf_io_a.yuv");
    auto seq = random_video(2, 64, 64, 1);
    write_yuv420(seq, path);
    CHECK(std::filesystem::file_size(path) == 12288);  // 64*64*1.5*2
    auto back = read_yuv420(path, 64, 64);
    CHECK(back.frame_count() == 2);
    std::remove(path.c_str());
}

TEST_CASE("yuv420 round trip is bytewise lossless") {
    const auto path = temp_path("tgaf_io_b.yuv");
    const auto path2 = temp_path("tgaf_io_c.yuv");
    auto seq = random_video(3, 32, 16, 2);
    write_yuv420(seq, path);
    auto back = read_yuv420(path, 32, 16);
    write_yuv420(back, path2);
    CHECK(slurp(path) == slurp(path2));
    CHECK(back.u == seq.u);
    CHECK(back.v == seq.v);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("yuv420 truncated file is rejected without a partial sequence") {
    const auto path = temp_path("tgaf_io_d.yuv");
    auto seq = random_video(2, 16, 16, 3);
    write_yuv420(seq, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
    CHECK_THROWS_WITH_AS(read_yuv420(path, 16, 16), doctest::Contains("multiple"), FormatError);
    CHECK_THROWS_AS(read_yuv420(path, 0, 16), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("luma quantization: clamp and round rules") {
    CHECK(luma_to_byte(1.0f) == 255);
    CHECK(luma_to_byte(-0.01f) == 0);
    CHECK(luma_to_byte(1.5f) == 255);
    CHECK(luma_to_byte(0.5f / 255.f) == 1);  // round half away from zero
    // byte -> float -> byte is the identity for every value
    for (int b = 0; b <= 255; ++b) CHECK(luma_to_byte(float(b) / 255.f) == b);
}

TEST_CASE("pgm header and payload") {
    const auto path = temp_path("tgaf_io_e.pgm");
    FrameY f(48, 64);
    write_pgm(f, path);
    auto bytes = slurp(path);
    const std::string header = "P5\n64 48\n255\n";
    REQUIRE(bytes.size() == header.size() + 3072);
    CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
    for (size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0);
    std::remove(path.c_str());
}
