#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "facegame/error.hpp"

namespace facegame {

// Single-channel image, row-major, intensities clamped to [0, 1].
class GrayImage
{
public:
    GrayImage() = default;

    GrayImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height), pixels_(checked_area(width, height), std::clamp(fill, 0.0, 1.0))
    {
    }

    GrayImage(int width, int height, std::vector<double> pixels)
        : width_(width), height_(height), pixels_(std::move(pixels))
    {
        if (pixels_.size() != checked_area(width, height)) {
            throw BadImage("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                           std::to_string(width) + "x" + std::to_string(height));
        }
        for (auto& v : pixels_) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, double v) { pixels_[static_cast<std::size_t>(y) * width_ + x] = std::clamp(v, 0.0, 1.0); }

    std::span<const double> pixels() const noexcept { return pixels_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    static std::size_t checked_area(int w, int h)
    {
        if (w <= 0 || h <= 0) throw BadImage("non-positive size " + std::to_string(w) + "x" + std::to_string(h));
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

inline double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
    return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
}

namespace detail {

inline void skip_pnm_space(std::span<const std::uint8_t> bytes, std::size_t& pos)
{
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(bytes[pos])) {
            ++pos;
        } else {
            break;
        }
    }
}

inline int read_pnm_int(std::span<const std::uint8_t> bytes, std::size_t& pos)
{
    skip_pnm_space(bytes, pos);
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw BadImage("malformed netpbm header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        v = v * 10 + (bytes[pos] - '0');
        if (v > 1'000'000) throw BadImage("netpbm dimension too large");
        ++pos;
    }
    return static_cast<int>(v);
}

} // namespace detail

/// Decodes binary netpbm: P5 (8-bit gray) or P6 (8-bit RGB, converted by luma).
inline GrayImage decode_netpbm(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw BadImage("expected binary PGM (P5) or PPM (P6)");
    }
    const bool rgb = bytes[1] == '6';
    std::size_t pos = 2;
    const int w = detail::read_pnm_int(bytes, pos);
    const int h = detail::read_pnm_int(bytes, pos);
    const int maxval = detail::read_pnm_int(bytes, pos);
    if (maxval <= 0 || maxval > 255) throw BadImage("only 8-bit netpbm is supported");
    ++pos; // single whitespace before raster
    const std::size_t channels = rgb ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (w <= 0 || h <= 0 || pos + need > bytes.size()) throw BadImage("truncated netpbm raster");

    std::vector<double> px(static_cast<std::size_t>(w) * h);
    const double scale = 255.0 / maxval;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (rgb) {
            const auto* p = &bytes[pos + 3 * i];
            px[i] = luma(static_cast<std::uint8_t>(std::min(255.0, p[0] * scale)),
                         static_cast<std::uint8_t>(std::min(255.0, p[1] * scale)),
                         static_cast<std::uint8_t>(std::min(255.0, p[2] * scale)));
        } else {
            px[i] = bytes[pos + i] * scale / 255.0;
        }
    }
    return GrayImage(w, h, std::move(px));
}

/// 8-bit binary PGM. Quantization rounds to nearest.
inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img)
{
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels().size());
    for (double v : img.pixels()) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    return out;
}

/// Rounds the image through 8-bit quantization, i.e. decode(encode(img)).
inline GrayImage quantize8(const GrayImage& img)
{
    std::vector<double> px(img.pixels().begin(), img.pixels().end());
    for (auto& v : px) v = std::lround(v * 255.0) / 255.0;
    return GrayImage(img.width(), img.height(), std::move(px));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BadImage("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BadImage("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline GrayImage read_image(const std::filesystem::path& path) { return decode_netpbm(read_file_bytes(path)); }

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file_bytes(path, encode_pgm(img)); }

/// Bilinear sample with pixel centers at integer coordinates. Samples outside
/// [0, w-1] x [0, h-1] return `outside`.
inline double sample_bilinear(const GrayImage& img, double x, double y, double outside = 0.0)
{
    const double max_x = img.width() - 1;
    const double max_y = img.height() - 1;
    if (!(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y)) return outside;
    const int x0 = std::min(static_cast<int>(x), img.width() - 1);
    const int y0 = std::min(static_cast<int>(y), img.height() - 1);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    const double bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

/// Bilinear resize mapping the corner pixel centers onto each other.
inline GrayImage resize_bilinear(const GrayImage& img, int width, int height)
{
    if (img.width() == width && img.height() == height) return img;
    GrayImage out(width, height);
    const double sx = width > 1 ? static_cast<double>(img.width() - 1) / (width - 1) : 0.0;
    const double sy = height > 1 ? static_cast<double>(img.height() - 1) / (height - 1) : 0.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out.set(x, y, sample_bilinear(img, x * sx, y * sy));
    }
    return out;
}

} // namespace facegame
