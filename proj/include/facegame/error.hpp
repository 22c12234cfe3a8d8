#pragma once

#include <stdexcept>
#include <string>

namespace facegame {

// Base of every error raised by the library. Subclasses carry no extra state;
// the message names the offending value.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

#define FACEGAME_DEFINE_ERROR(Name)                                                                \
    class Name : public Error                                                                      \
    {                                                                                              \
    public:                                                                                        \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}                       \
    }

// core
FACEGAME_DEFINE_ERROR(UnknownAuCode);
FACEGAME_DEFINE_ERROR(UnknownEmotion);
FACEGAME_DEFINE_ERROR(BadLandmarks);
FACEGAME_DEFINE_ERROR(BadImage);

// features
FACEGAME_DEFINE_ERROR(DegenerateEyes);
FACEGAME_DEFINE_ERROR(BadDimensions);

// au detector
FACEGAME_DEFINE_ERROR(DimensionMismatch);
FACEGAME_DEFINE_ERROR(DegenerateData);
FACEGAME_DEFINE_ERROR(BadModelFile);

// explainer
FACEGAME_DEFINE_ERROR(EmptyUniverse);
FACEGAME_DEFINE_ERROR(BadDictionary);

// game service
FACEGAME_DEFINE_ERROR(UnknownSession);
FACEGAME_DEFINE_ERROR(UnknownRound);
FACEGAME_DEFINE_ERROR(SessionComplete);
FACEGAME_DEFINE_ERROR(RoundExhausted);
FACEGAME_DEFINE_ERROR(RoundClosed);
FACEGAME_DEFINE_ERROR(PipelineError);
FACEGAME_DEFINE_ERROR(EmptyTargetAuSet);
FACEGAME_DEFINE_ERROR(NoTargetAvailable);
FACEGAME_DEFINE_ERROR(BadRequest);
FACEGAME_DEFINE_ERROR(StoreError);

// dataset forge
FACEGAME_DEFINE_ERROR(MissingFrame);

// ferlab
FACEGAME_DEFINE_ERROR(BadInputSize);
FACEGAME_DEFINE_ERROR(ShapeMismatch);
FACEGAME_DEFINE_ERROR(InsufficientClassData);

// statlab
FACEGAME_DEFINE_ERROR(DegenerateVariance);
FACEGAME_DEFINE_ERROR(LengthMismatch);
FACEGAME_DEFINE_ERROR(EmptyInput);

#undef FACEGAME_DEFINE_ERROR

} // namespace facegame
