#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "facegame/error.hpp"

namespace facegame {

struct Point
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kFlatLandmarkSize = kLandmarkCount * 2;

// 68-point facial landmarks (iBUG/dlib ordering) in pixel coordinates.
class LandmarkSet
{
public:
    LandmarkSet() = default;

    explicit LandmarkSet(const std::array<Point, kLandmarkCount>& points) : points_(points) { validate(); }

    /// Throws BadLandmarks unless exactly 68 finite points are supplied.
    static LandmarkSet from_points(std::span<const Point> points)
    {
        if (points.size() != kLandmarkCount) {
            throw BadLandmarks("expected 68 points, got " + std::to_string(points.size()));
        }
        std::array<Point, kLandmarkCount> pts{};
        std::copy(points.begin(), points.end(), pts.begin());
        return LandmarkSet(pts);
    }

    const std::array<Point, kLandmarkCount>& points() const noexcept { return points_; }
    const Point& operator[](std::size_t i) const { return points_[i]; }

    friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;

private:
    void validate() const
    {
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i].x) || !std::isfinite(points_[i].y)) {
                throw BadLandmarks("point " + std::to_string(i) + " is not finite");
            }
        }
    }

    std::array<Point, kLandmarkCount> points_{};
};

/// Interleaved (x0, y0, x1, y1, ...) layout, 136 values.
inline std::vector<double> flatten_landmarks(const LandmarkSet& l)
{
    std::vector<double> out;
    out.reserve(kFlatLandmarkSize);
    for (const auto& p : l.points()) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

} // namespace facegame
