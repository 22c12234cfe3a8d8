#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/core/action_unit.hpp"
#include "facegame/core/emotion.hpp"
#include "facegame/core/image.hpp"
#include "facegame/core/landmarks.hpp"

namespace facegame {

enum class Group : std::uint8_t
{
    control = 0,
    treatment = 1,
};

inline std::string_view to_string(Group g) { return g == Group::control ? "control" : "treatment"; }

inline Group parse_group(std::string_view s)
{
    if (s == "control") return Group::control;
    if (s == "treatment") return Group::treatment;
    throw BadRequest("unknown group '" + std::string(s) + "'");
}

struct TargetEntry
{
    std::string target_id;
    GrayImage image;
    std::string asset_ref; // original (possibly color) asset for the UI
    Emotion emotion = Emotion::anger;
    AUSet au_set;
    LandmarkSet landmarks;
};

// One scored attempt. `target_au_set` is stored alongside the player's set so
// that the score stays recomputable from the log alone.
struct RoundRecord
{
    std::uint64_t record_id = 0;
    std::string session_id;
    std::string round_id;
    std::string target_id;
    Emotion emotion = Emotion::anger;
    Group group = Group::control;
    int attempt_index = 1;
    AUSet player_au_set;
    AUSet target_au_set;
    double score = 0.0;
    bool prescriptions_shown = false;
    std::optional<std::string> frame_ref;
    std::string captured_at;        // server receive time, UTC
    std::int64_t client_capture_ms = 0;

    friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// ---- JSON forms -------------------------------------------------------------

inline nlohmann::json au_set_to_json(AUSet set) { return set.codes(); }

inline AUSet au_set_from_json(const nlohmann::json& j)
{
    if (!j.is_array()) throw BadRequest("AU set must be an array of integer codes");
    std::vector<int> codes;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw BadRequest("AU code must be an integer");
        codes.push_back(v.get<int>());
    }
    return au_set_from_codes(codes);
}

inline nlohmann::json landmarks_to_json(const LandmarkSet& l)
{
    auto arr = nlohmann::json::array();
    for (const auto& p : l.points()) arr.push_back({p.x, p.y});
    return arr;
}

/// Accepts 68 [x, y] pairs. Throws BadLandmarks on shape or value problems.
inline LandmarkSet landmarks_from_json(const nlohmann::json& j)
{
    if (!j.is_array()) throw BadLandmarks("landmarks must be an array of [x, y] pairs");
    std::vector<Point> pts;
    pts.reserve(j.size());
    for (const auto& pair : j) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
            throw BadLandmarks("each landmark must be a numeric [x, y] pair");
        }
        pts.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    return LandmarkSet::from_points(pts);
}

// Record log line. Field names are part of the on-disk format; do not rename.
inline nlohmann::json to_json(const RoundRecord& r)
{
    nlohmann::json j;
    j["record_id"] = r.record_id;
    j["session_id"] = r.session_id;
    j["round_id"] = r.round_id;
    j["target_id"] = r.target_id;
    j["emotion"] = to_int(r.emotion);
    j["emotion_name"] = to_string(r.emotion);
    j["group"] = to_string(r.group);
    j["attempt_index"] = r.attempt_index;
    j["player_aus"] = au_set_to_json(r.player_au_set);
    j["target_aus"] = au_set_to_json(r.target_au_set);
    j["score"] = r.score;
    j["prescriptions_shown"] = r.prescriptions_shown;
    j["frame_ref"] = r.frame_ref ? nlohmann::json(*r.frame_ref) : nlohmann::json(nullptr);
    j["captured_at"] = r.captured_at;
    j["client_capture_ms"] = r.client_capture_ms;
    return j;
}

inline RoundRecord round_record_from_json(const nlohmann::json& j)
{
    RoundRecord r;
    r.record_id = j.at("record_id").get<std::uint64_t>();
    r.session_id = j.at("session_id").get<std::string>();
    r.round_id = j.at("round_id").get<std::string>();
    r.target_id = j.at("target_id").get<std::string>();
    r.emotion = emotion_from_int(j.at("emotion").get<int>());
    r.group = parse_group(j.at("group").get<std::string>());
    r.attempt_index = j.at("attempt_index").get<int>();
    r.player_au_set = au_set_from_json(j.at("player_aus"));
    r.target_au_set = au_set_from_json(j.at("target_aus"));
    r.score = j.at("score").get<double>();
    r.prescriptions_shown = j.at("prescriptions_shown").get<bool>();
    if (j.contains("frame_ref") && !j["frame_ref"].is_null()) r.frame_ref = j["frame_ref"].get<std::string>();
    r.captured_at = j.at("captured_at").get<std::string>();
    r.client_capture_ms = j.value("client_capture_ms", std::int64_t{0});
    return r;
}

} // namespace facegame
