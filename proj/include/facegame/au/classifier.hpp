#pragma once

#include <memory>

#include "facegame/au/model.hpp"
#include "facegame/core/image.hpp"
#include "facegame/core/landmarks.hpp"
#include "facegame/features/pipeline.hpp"

namespace facegame::au {

// Anything that turns a face frame plus landmarks into a set of AUs. The game
// service depends only on this interface.
class AuClassifier
{
public:
    virtual ~AuClassifier() = default;
    virtual AUSet detect(const GrayImage& frame, const LandmarkSet& landmarks) const = 0;
};

// Reference detector: feature pipeline + per-AU logistic regressions.
class ReferenceAuClassifier final : public AuClassifier
{
public:
    explicit ReferenceAuClassifier(AuModel model, features::PipelineParams params = {})
        : model_(std::move(model)), params_(params)
    {
    }

    AUSet detect(const GrayImage& frame, const LandmarkSet& landmarks) const override
    {
        return detect_aus(model_, features::extract_features(frame, landmarks, params_));
    }

    const AuModel& model() const noexcept { return model_; }

private:
    AuModel model_;
    features::PipelineParams params_;
};

} // namespace facegame::au
