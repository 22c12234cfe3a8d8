#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "facegame/error.hpp"

namespace facegame {

// Encoding is alphabetical and stable in every export.
enum class Emotion : std::uint8_t
{
    anger = 0,
    disgust = 1,
    fear = 2,
    happiness = 3,
    sadness = 4,
    surprise = 5,
};

inline constexpr std::size_t kEmotionCount = 6;

inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions{
    Emotion::anger, Emotion::disgust, Emotion::fear, Emotion::happiness, Emotion::sadness, Emotion::surprise};

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames{
    "anger", "disgust", "fear", "happiness", "sadness", "surprise"};

constexpr int to_int(Emotion e) noexcept { return static_cast<int>(e); }

inline std::string_view to_string(Emotion e) { return kEmotionNames[static_cast<std::size_t>(e)]; }

inline Emotion emotion_from_int(int v)
{
    if (v < 0 || v >= static_cast<int>(kEmotionCount)) throw UnknownEmotion("code " + std::to_string(v));
    return static_cast<Emotion>(v);
}

/// Accepts the canonical names plus the adjective forms dataset label files tend to use.
inline Emotion parse_emotion(std::string_view s)
{
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
        if (s == kEmotionNames[i]) return static_cast<Emotion>(i);
    }
    if (s == "angry") return Emotion::anger;
    if (s == "disgusted") return Emotion::disgust;
    if (s == "fearful" || s == "afraid") return Emotion::fear;
    if (s == "happy") return Emotion::happiness;
    if (s == "sad") return Emotion::sadness;
    if (s == "surprised") return Emotion::surprise;
    throw UnknownEmotion("'" + std::string(s) + "'");
}

} // namespace facegame
