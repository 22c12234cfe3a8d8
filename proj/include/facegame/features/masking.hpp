#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "facegame/features/alignment.hpp"

namespace facegame::features {

/// Andrew's monotone chain. Counter-clockwise in a y-up frame, collinear points dropped.
inline std::vector<Point> convex_hull(std::span<const Point> input)
{
    std::vector<Point> pts(input.begin(), input.end());
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// Inclusive: points on the boundary count as inside.
inline bool inside_convex_hull(std::span<const Point> hull, Point p)
{
    if (hull.size() < 3) return false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % hull.size()];
        const double c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (c < 0.0) return false;
    }
    return true;
}

/// Zeroes every pixel whose center lies outside the convex hull of the landmarks.
inline AlignedFace mask_face(const AlignedFace& face)
{
    const auto hull = convex_hull(face.landmarks.points());
    AlignedFace out = face;
    for (int y = 0; y < out.image.height(); ++y) {
        for (int x = 0; x < out.image.width(); ++x) {
            if (!inside_convex_hull(hull, {static_cast<double>(x), static_cast<double>(y)})) out.image.set(x, y, 0.0);
        }
    }
    return out;
}

} // namespace facegame::features
