#pragma once

#include <vector>

#include "facegame/features/alignment.hpp"
#include "facegame/features/hog.hpp"
#include "facegame/features/masking.hpp"

namespace facegame::features {

inline constexpr std::size_t kFeatureSize = kHogSize + kFlatLandmarkSize; // 5544

struct PipelineParams
{
    AlignParams align;
    HogParams hog;
};

// HOG of the masked aligned face followed by the aligned landmarks divided by
// the output size (x0, y0, x1, y1, ...).
using FeatureVector = std::vector<double>;

/// align -> mask -> HOG, then append normalized aligned landmarks.
/// Propagates DegenerateEyes and BadDimensions.
inline FeatureVector extract_features(const GrayImage& img, const LandmarkSet& l, const PipelineParams& p = {})
{
    const auto masked = mask_face(align_face(img, l, p.align));
    FeatureVector out = compute_hog(masked.image, p.hog);
    out.reserve(out.size() + kFlatLandmarkSize);
    const double inv = 1.0 / p.align.out_size;
    for (double v : flatten_landmarks(masked.landmarks)) out.push_back(v * inv);
    return out;
}

} // namespace facegame::features
