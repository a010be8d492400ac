#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgaf/data.hpp"

namespace tgaf {

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raw I420 sequence: per-frame Y plane plus pass-through chroma.
struct VideoSequence {
    int width = 0, height = 0;
    std::vector<std::vector<std::uint8_t>> y, u, v;

    int frame_count() const { return int(y.size()); }
    bool has_chroma() const { return !u.empty(); }
};

inline std::uint8_t luma_to_byte(float value) {
    // round half away from zero, clamp to [0,255]
    const long q = std::lround(255.0 * double(value));
    return std::uint8_t(q < 0 ? 0 : q > 255 ? 255 : q);
}

inline FrameY frame_from_bytes(const std::vector<std::uint8_t>& plane, int h, int w) {
    FrameY f(h, w);
    for (size_t i = 0; i < plane.size(); ++i) f.v[i] = float(plane[i]) / 255.0f;
    return f;
}

inline std::vector<FrameY> luma_frames(const VideoSequence& seq) {
    std::vector<FrameY> out;
    out.reserve(seq.y.size());
    for (const auto& p : seq.y) out.push_back(frame_from_bytes(p, seq.height, seq.width));
    return out;
}

inline VideoSequence read_yuv420(const std::string& path, int width, int height) {
    if (width <= 0 || height <= 0)
        throw FormatError("read_yuv420: dimensions must be positive");
    if (width % 2 != 0 || height % 2 != 0)
        throw FormatError("read_yuv420: 4:2:0 requires even dimensions");
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("read_yuv420: cannot open " + path);
    const std::int64_t size = in.tellg();
    in.seekg(0);
    const std::int64_t frame_bytes = std::int64_t(width) * height * 3 / 2;
    if (size == 0 || size % frame_bytes != 0)
        throw FormatError("read_yuv420: file size " + std::to_string(size) +
                          " is not a multiple of the frame size " + std::to_string(frame_bytes) +
                          " (" + path + ")");
    VideoSequence seq;
    seq.width = width;
    seq.height = height;
    const std::int64_t frames = size / frame_bytes;
    const std::int64_t ysize = std::int64_t(width) * height, csize = ysize / 4;
    for (std::int64_t f = 0; f < frames; ++f) {
        std::vector<std::uint8_t> yp(ysize), up(csize), vp(csize);
        in.read(reinterpret_cast<char*>(yp.data()), ysize);
        in.read(reinterpret_cast<char*>(up.data()), csize);
        in.read(reinterpret_cast<char*>(vp.data()), csize);
        if (!in) throw FormatError("read_yuv420: truncated read in " + path);
        seq.y.push_back(std::move(yp));
        seq.u.push_back(std::move(up));
        seq.v.push_back(std::move(vp));
    }
    return seq;
}

inline void write_yuv420(const VideoSequence& seq, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("write_yuv420: cannot open " + path + " for writing");
    const std::int64_t csize = std::int64_t(seq.width) * seq.height / 4;
    const std::vector<std::uint8_t> gray(csize, 128);
    for (int f = 0; f < seq.frame_count(); ++f) {
        out.write(reinterpret_cast<const char*>(seq.y[f].data()), std::int64_t(seq.y[f].size()));
        const auto& up = seq.has_chroma() ? seq.u[f] : gray;
        const auto& vp = seq.has_chroma() ? seq.v[f] : gray;
        out.write(reinterpret_cast<const char*>(up.data()), csize);
        out.write(reinterpret_cast<const char*>(vp.data()), csize);
    }
    if (!out) throw FormatError("write_yuv420: write failed for " + path);
}

inline void write_pgm(const FrameY& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("write_pgm: cannot open " + path + " for writing");
    out << "P5\n" << frame.w << " " << frame.h << "\n255\n";
    std::vector<std::uint8_t> bytes(frame.v.size());
    for (size_t i = 0; i < frame.v.size(); ++i) bytes[i] = luma_to_byte(frame.v[i]);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::int64_t(bytes.size()));
    if (!out) throw FormatError("write_pgm: write failed for " + path);
}

}  // namespace tgaf
