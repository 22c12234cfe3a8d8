#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "facegame/core/image.hpp"
#include "facegame/error.hpp"

namespace facegame::features {

// Dalal-Triggs HOG. Defaults give 13 x 13 blocks x 2 x 2 cells x 8 bins = 5408
// values for a 112 x 112 input.
struct HogParams
{
    int cell_size = 8;
    int block_cells = 2;
    int bins = 8;
    double clip = 0.2;
    double epsilon = 1e-12;
};

inline constexpr std::size_t kHogSize = 5408;

struct HogLayout
{
    int cells_x = 0;
    int cells_y = 0;
    int blocks_x = 0;
    int blocks_y = 0;
    std::size_t block_length = 0;

    std::size_t size() const { return static_cast<std::size_t>(blocks_x) * blocks_y * block_length; }
};

/// Throws BadDimensions if the image does not tile into whole cells with at least one block.
inline HogLayout hog_layout(int width, int height, const HogParams& p = {})
{
    if (p.cell_size <= 0 || p.block_cells <= 0 || p.bins <= 0) throw BadDimensions("non-positive HOG parameter");
    if (width % p.cell_size != 0 || height % p.cell_size != 0) {
        throw BadDimensions("image " + std::to_string(width) + "x" + std::to_string(height) +
                            " is not a multiple of the cell size " + std::to_string(p.cell_size));
    }
    HogLayout l;
    l.cells_x = width / p.cell_size;
    l.cells_y = height / p.cell_size;
    l.blocks_x = l.cells_x - p.block_cells + 1;
    l.blocks_y = l.cells_y - p.block_cells + 1;
    if (l.blocks_x <= 0 || l.blocks_y <= 0) throw BadDimensions("image smaller than one HOG block");
    l.block_length = static_cast<std::size_t>(p.block_cells) * p.block_cells * p.bins;
    return l;
}

namespace detail {

// L2 normalize, clip, renormalize.
inline void l2_hys(double* v, std::size_t n, double clip, double eps)
{
    auto normalize = [&] {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += v[i] * v[i];
        const double inv = 1.0 / std::sqrt(ss + eps * eps);
        for (std::size_t i = 0; i < n; ++i) v[i] *= inv;
    };
    normalize();
    for (std::size_t i = 0; i < n; ++i) v[i] = std::min(v[i], clip);
    normalize();
}

} // namespace detail

/// Per-cell orientation histograms, layout [cell_y][cell_x][bin].
///
/// Gradients are centered differences (zero on the image border). Orientation
/// is unsigned in [0, 180) degrees; bin b is centered at b * 180 / bins and
/// each pixel's magnitude is split linearly between the two nearest centers.
inline std::vector<double> cell_histograms(const GrayImage& img, const HogParams& p, const HogLayout& layout)
{
    const int w = img.width();
    const int h = img.height();
    const double bin_width = 180.0 / p.bins;
    std::vector<double> hist(static_cast<std::size_t>(layout.cells_x) * layout.cells_y * p.bins, 0.0);

    for (int y = 0; y < h; ++y) {
        const int cy = y / p.cell_size;
        for (int x = 0; x < w; ++x) {
            const double gx = (x > 0 && x < w - 1) ? img.at(x + 1, y) - img.at(x - 1, y) : 0.0;
            const double gy = (y > 0 && y < h - 1) ? img.at(x, y + 1) - img.at(x, y - 1) : 0.0;
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;

            double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            if (deg < 0.0) deg += 180.0;
            if (deg >= 180.0) deg -= 180.0;
            const double pos = deg / bin_width;
            const int lo = static_cast<int>(std::floor(pos));
            const double frac = pos - lo;
            const int b0 = lo % p.bins;
            const int b1 = (lo + 1) % p.bins;

            double* cell = &hist[(static_cast<std::size_t>(cy) * layout.cells_x + x / p.cell_size) * p.bins];
            cell[b0] += mag * (1.0 - frac);
            cell[b1] += mag * frac;
        }
    }
    return hist;
}

/// Block-normalized descriptor in row-major block order; within a block,
/// cells row-major then bins.
inline std::vector<double> compute_hog(const GrayImage& img, const HogParams& p = {})
{
    const auto layout = hog_layout(img.width(), img.height(), p);
    const auto hist = cell_histograms(img, p, layout);

    std::vector<double> out(layout.size());
    double* dst = out.data();
    for (int by = 0; by < layout.blocks_y; ++by) {
        for (int bx = 0; bx < layout.blocks_x; ++bx) {
            double* block = dst;
            for (int cy = by; cy < by + p.block_cells; ++cy) {
                for (int cx = bx; cx < bx + p.block_cells; ++cx) {
                    const double* cell = &hist[(static_cast<std::size_t>(cy) * layout.cells_x + cx) * p.bins];
                    dst = std::copy(cell, cell + p.bins, dst);
                }
            }
            detail::l2_hys(block, layout.block_length, p.clip, p.epsilon);
        }
    }
    return out;
}

} // namespace facegame::features
