#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "facegame/core/image.hpp"
#include "facegame/core/landmarks.hpp"
#include "facegame/error.hpp"

namespace facegame::features {

struct EyeCenters
{
    Point left;
    Point right;
};

/// Mean of landmarks 36-41 (left eye) and 42-47 (right eye).
inline EyeCenters eye_centers(const LandmarkSet& l)
{
    EyeCenters c;
    for (std::size_t i = 0; i < 6; ++i) {
        c.left.x += l[36 + i].x;
        c.left.y += l[36 + i].y;
        c.right.x += l[42 + i].x;
        c.right.y += l[42 + i].y;
    }
    c.left.x /= 6.0;
    c.left.y /= 6.0;
    c.right.x /= 6.0;
    c.right.y /= 6.0;
    return c;
}

struct AlignParams
{
    int out_size = 112;
    double canonical_iod = 46.0; // output inter-ocular distance, px
    double eye_row = 44.0;       // output y of both eye centers
};

// Similarity transform q = scale * R(angle) * (p - src_origin) + dst_origin.
struct SimilarityTransform
{
    double scale = 1.0;
    double angle = 0.0; // radians, applied rotation
    Point src_origin;
    Point dst_origin;

    Point apply(Point p) const
    {
        const double c = std::cos(angle) * scale;
        const double s = std::sin(angle) * scale;
        const double dx = p.x - src_origin.x;
        const double dy = p.y - src_origin.y;
        return {c * dx - s * dy + dst_origin.x, s * dx + c * dy + dst_origin.y};
    }

    Point invert(Point q) const
    {
        const double c = std::cos(angle) / scale;
        const double s = std::sin(angle) / scale;
        const double dx = q.x - dst_origin.x;
        const double dy = q.y - dst_origin.y;
        return {c * dx + s * dy + src_origin.x, -s * dx + c * dy + src_origin.y};
    }
};

struct AlignedFace
{
    GrayImage image;
    LandmarkSet landmarks;
    SimilarityTransform transform;

    double rotation_degrees() const { return transform.angle * 180.0 / std::numbers::pi; }
};

/// Transform that puts the eye centers at (S/2 -+ iod/2, eye_row).
inline SimilarityTransform eye_alignment_transform(const LandmarkSet& l, const AlignParams& params)
{
    const auto eyes = eye_centers(l);
    const double dx = eyes.right.x - eyes.left.x;
    const double dy = eyes.right.y - eyes.left.y;
    const double dist = std::hypot(dx, dy);
    if (!(dist > 0.0)) throw DegenerateEyes("eye centers coincide");

    SimilarityTransform t;
    t.scale = params.canonical_iod / dist;
    t.angle = -std::atan2(dy, dx);
    t.src_origin = eyes.left;
    t.dst_origin = {params.out_size / 2.0 - params.canonical_iod / 2.0, params.eye_row};
    return t;
}

/// Warps `img` through `t` into a width x height frame; unmapped pixels are 0.
inline GrayImage warp_image(const GrayImage& img, const SimilarityTransform& t, int width, int height)
{
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Point src = t.invert({static_cast<double>(x), static_cast<double>(y)});
            out.set(x, y, sample_bilinear(img, src.x, src.y, 0.0));
        }
    }
    return out;
}

inline LandmarkSet transform_landmarks(const LandmarkSet& l, const SimilarityTransform& t)
{
    std::array<Point, kLandmarkCount> pts{};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) pts[i] = t.apply(l[i]);
    return LandmarkSet(pts);
}

/// Rotates, scales and crops so the eyes land on a fixed horizontal line.
/// Throws DegenerateEyes when the eye centers coincide.
inline AlignedFace align_face(const GrayImage& img, const LandmarkSet& l, const AlignParams& params = {})
{
    const auto t = eye_alignment_transform(l, params);
    return {warp_image(img, t, params.out_size, params.out_size), transform_landmarks(l, t), t};
}

} // namespace facegame::features
