#pragma once

#include <random>
#include <string>

#include "facegame/features/alignment.hpp"
#include "facegame/ferlab/data.hpp"
#include "facegame/synth/face_renderer.hpp"

namespace facegame::synth {

/// A rendered face showing the emotion's prototype AUs, each AU dropped with
/// probability `jitter` and one random extra AU added with the same
/// probability, then eye-aligned and scaled to side x side.
inline GrayImage expression_image(Emotion e, std::size_t side, std::mt19937_64& rng, double jitter = 0.2)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto spec = random_face_spec(rng, 0.0);
    for (auto au : prototype_aus(e).members()) {
        if (unit(rng) >= jitter) spec.aus.insert(au);
    }
    if (unit(rng) < jitter) spec.aus.insert(ActionUnit::from_index(rng() % kAuCount));
    const auto face = render_face(spec);
    const auto aligned = features::align_face(face.image, face.landmarks);
    const int s = static_cast<int>(side);
    return resize_bilinear(aligned.image, s, s);
}

inline ferlab::LabeledImageSet expression_set(std::size_t per_class, std::size_t side, std::uint64_t seed,
                                              std::string name, double jitter = 0.2)
{
    std::mt19937_64 rng(seed);
    ferlab::LabeledImageSet set(std::move(name));
    for (std::size_t i = 0; i < per_class; ++i) {
        for (auto e : kAllEmotions) set.add(expression_image(e, side, rng, jitter), e);
    }
    return set;
}

} // namespace facegame::synth
