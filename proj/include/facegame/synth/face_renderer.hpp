#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "facegame/core/action_unit.hpp"
#include "facegame/core/emotion.hpp"
#include "facegame/core/image.hpp"
#include "facegame/core/landmarks.hpp"

// Procedural faces with known landmarks and AU content, used for fixtures.
// Geometry lives in a face frame: origin at the midpoint between the eyes, x to
// the image right, y down, unit = inter-ocular distance. Every active AU adds a
// bright oriented stroke at its own position inside the landmark hull, so a
// HOG-based detector can learn it.
namespace facegame::synth {

struct FaceSpec
{
    AUSet aus;
    int width = 160;
    int height = 180;
    Point eye_mid{80.0, 72.0};
    double iod = 46.0;
    double roll_degrees = 0.0;
    double noise = 0.0;
    std::uint64_t noise_seed = 0;
};

struct RenderedFace
{
    GrayImage image;
    LandmarkSet landmarks;
};

namespace detail {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

inline std::array<Point, kLandmarkCount> face_frame_landmarks()
{
    std::array<Point, kLandmarkCount> p{};
    // jaw 0-16
    for (int i = 0; i < 17; ++i) {
        const double a = deg2rad(192.0 - i * (204.0 / 16.0));
        p[i] = {0.95 * std::cos(a), 0.35 + 1.1 * std::sin(a)};
    }
    // brows 17-21 and 22-26
    for (int i = 0; i < 5; ++i) {
        const double t = i / 4.0;
        const double arch = 0.08 * std::sin(t * std::numbers::pi);
        p[17 + i] = {-0.85 + 0.7 * t, -0.3 - arch};
        p[22 + i] = {0.15 + 0.7 * t, -0.3 - 0.08 * std::sin((1.0 - t) * std::numbers::pi)};
    }
    // nose bridge 27-30, nostrils 31-35
    for (int i = 0; i < 4; ++i) p[27 + i] = {0.0, 0.05 + 0.15 * i};
    for (int i = 0; i < 5; ++i) p[31 + i] = {-0.18 + 0.09 * i, 0.55 + (i == 2 ? 0.03 : 0.0)};
    // eyes: outer corner, two upper, inner corner, two lower
    const std::array<double, 6> eye_angles{180, 120, 60, 0, 300, 240};
    for (int i = 0; i < 6; ++i) {
        const double a = deg2rad(eye_angles[i]);
        p[36 + i] = {-0.5 + 0.17 * std::cos(a), -0.07 * std::sin(a)};
        p[42 + i] = {0.5 + 0.17 * std::cos(a), -0.07 * std::sin(a)};
    }
    // outer lips 48-59, inner lips 60-67
    for (int i = 0; i < 12; ++i) {
        const double a = deg2rad(180.0 - 30.0 * i);
        p[48 + i] = {0.38 * std::cos(a), 0.95 - 0.14 * std::sin(a)};
    }
    const std::array<double, 8> inner{180, 135, 90, 45, 0, -45, -90, -135};
    for (int i = 0; i < 8; ++i) {
        const double a = deg2rad(inner[i]);
        p[60 + i] = {0.25 * std::cos(a), 0.95 - 0.05 * std::sin(a)};
    }
    return p;
}

inline Point au_mark_center(std::size_t index)
{
    static constexpr std::array<double, 5> xs{-0.5, -0.25, 0.0, 0.25, 0.5};
    static constexpr std::array<double, 4> ys{-0.17, 0.27, 0.66, 1.22};
    return {xs[index % 5], ys[index / 5]};
}

inline double au_mark_angle(std::size_t index) { return deg2rad(static_cast<double>((index * 47) % 180)); }

inline double segment_distance(Point p, Point a, Point b)
{
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    return std::hypot(p.x - a.x - t * vx, p.y - a.y - t * vy);
}

inline bool in_ellipse(Point p, Point c, double rx, double ry)
{
    const double dx = (p.x - c.x) / rx, dy = (p.y - c.y) / ry;
    return dx * dx + dy * dy <= 1.0;
}

inline double face_intensity(Point q, AUSet aus, const std::array<Point, kLandmarkCount>& lm)
{
    double v = 0.22 + 0.03 * std::sin(3.0 * q.x);
    if (in_ellipse(q, {0.0, 0.45}, 1.0, 1.2)) v = 0.62 - 0.05 * q.y;
    if (in_ellipse(q, {-0.5, 0.0}, 0.17, 0.07) || in_ellipse(q, {0.5, 0.0}, 0.17, 0.07)) v = 0.15;
    for (int i = 0; i < 4; ++i) {
        if (segment_distance(q, lm[17 + i], lm[18 + i]) < 0.035) v = 0.2;
        if (segment_distance(q, lm[22 + i], lm[23 + i]) < 0.035) v = 0.2;
    }
    if (segment_distance(q, lm[27], lm[30]) < 0.02) v = 0.5;
    if (in_ellipse(q, {0.0, 0.95}, 0.38, 0.14)) v = 0.38;
    if (in_ellipse(q, {0.0, 0.95}, 0.25, 0.05)) v = 0.1;

    for (auto au : aus.members()) {
        const Point c = au_mark_center(au.index());
        const double a = au_mark_angle(au.index());
        const Point d{0.1 * std::cos(a), 0.1 * std::sin(a)};
        if (segment_distance(q, {c.x - d.x, c.y - d.y}, {c.x + d.x, c.y + d.y}) < 0.028) v = 0.95;
    }
    return v;
}

} // namespace detail

/// Renders the face with 2x2 supersampling; landmarks are exact.
inline RenderedFace render_face(const FaceSpec& spec)
{
    const auto lm = detail::face_frame_landmarks();
    const double c = std::cos(detail::deg2rad(spec.roll_degrees));
    const double s = std::sin(detail::deg2rad(spec.roll_degrees));

    std::array<Point, kLandmarkCount> canvas_lm{};
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const Point& p = lm[i];
        canvas_lm[i] = {spec.eye_mid.x + spec.iod * (c * p.x - s * p.y), spec.eye_mid.y + spec.iod * (s * p.x + c * p.y)};
    }

    std::mt19937_64 rng(spec.noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    GrayImage img(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < 2; ++sy) {
                for (int sx = 0; sx < 2; ++sx) {
                    const double dx = x - 0.25 + 0.5 * sx - spec.eye_mid.x;
                    const double dy = y - 0.25 + 0.5 * sy - spec.eye_mid.y;
                    const Point q{(c * dx + s * dy) / spec.iod, (-s * dx + c * dy) / spec.iod};
                    acc += detail::face_intensity(q, spec.aus, lm);
                }
            }
            double v = acc / 4.0;
            if (spec.noise > 0.0) v += spec.noise * gauss(rng);
            img.set(x, y, v);
        }
    }
    return {std::move(img), LandmarkSet(canvas_lm)};
}

/// Prototypical AU configuration per basic emotion (FACS-style signatures).
inline AUSet prototype_aus(Emotion e)
{
    switch (e) {
    case Emotion::anger: return au_set_from_codes({4, 5, 7, 23});
    case Emotion::disgust: return au_set_from_codes({9, 10, 17});
    case Emotion::fear: return au_set_from_codes({1, 2, 4, 5, 20, 25});
    case Emotion::happiness: return au_set_from_codes({6, 12, 25});
    case Emotion::sadness: return au_set_from_codes({1, 4, 15});
    case Emotion::surprise: return au_set_from_codes({1, 2, 5, 25, 26});
    }
    return {};
}

/// Random face pose and AU content for detector training data.
inline FaceSpec random_face_spec(std::mt19937_64& rng, double au_probability = 0.3)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    FaceSpec spec;
    for (std::size_t k = 0; k < kAuCount; ++k) {
        if (unit(rng) < au_probability) spec.aus.insert(ActionUnit::from_index(k));
    }
    spec.roll_degrees = -8.0 + 16.0 * unit(rng);
    spec.iod = 42.0 + 8.0 * unit(rng);
    spec.eye_mid = {80.0 + 8.0 * (unit(rng) - 0.5), 72.0 + 8.0 * (unit(rng) - 0.5)};
    spec.noise = 0.03 * unit(rng);
    spec.noise_seed = rng();
    return spec;
}

} // namespace facegame::synth
