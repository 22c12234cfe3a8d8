#pragma once

#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "facegame/game/service.hpp"
#include "facegame/util/base64.hpp"

// HTTP binding of GameService. Every body is JSON. Errors come back as
//   { "error": "<ErrorKind>", "message": "<detail>" }
// with 400 for malformed input, 404 for unknown ids, 409 for state conflicts
// and 422 when the feature pipeline or target ingestion rejects an image.
//
//   POST /api/sessions                {group_policy, group?, player_meta?}
//   POST /api/sessions/{id}/rounds
//   POST /api/rounds/{id}/attempts    {frame, landmarks, captured_at?}
//   GET  /api/sessions/{id}/history
//   GET  /api/targets
//   POST /api/targets                 {target_id, image, landmarks, emotion}
//
// Images travel as base64 netpbm (P5 or P6). Target AU sets appear only on
// the operator endpoints and, in history, for rounds that are no longer open.
namespace facegame::game {

namespace wire {

inline nlohmann::json session(const SessionInfo& s)
{
    nlohmann::json j{{"session_id", s.session_id},
                     {"group", std::string(to_string(s.group))},
                     {"mode", std::string(to_string(s.mode))},
                     {"created_at", s.created_at}};
    j["rounds_total"] = s.mode == PlayMode::experiment ? nlohmann::json(kExperimentRounds) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json round_start(const RoundView& r)
{
    return {{"round_id", r.round_id},
            {"session_id", r.session_id},
            {"round_number", r.round_number},
            {"target_id", r.target->target_id},
            {"target_image", base64::encode(encode_pgm(r.target->image))},
            {"image_format", "pgm"},
            {"emotion", std::string(to_string(r.target->emotion))},
            {"attempts_remaining", r.attempts_remaining()},
            {"max_attempts", r.max_attempts}};
}

inline nlohmann::json prescription(const explain::Prescription& p)
{
    return {{"au", p.au.code()},
            {"polarity", std::string(explain::to_string(p.polarity))},
            {"region", std::string(explain::to_string(p.region))},
            {"text", p.text}};
}

// The correct/spurious/missing split is left out: together with the player's
// own AUs it would reveal the target set.
inline nlohmann::json attempt(const AttemptResult& a)
{
    auto rx = nlohmann::json::array();
    for (const auto& p : a.prescriptions) rx.push_back(prescription(p));
    return {{"record_id", a.record_id},
            {"score", a.score},
            {"player_aus", au_set_to_json(a.player_aus)},
            {"prescriptions", rx},
            {"attempt_index", a.attempt_index},
            {"attempts_remaining", a.attempts_remaining},
            {"retry_allowed", a.retry_allowed}};
}

inline nlohmann::json history(const SessionInfo& s, const std::vector<RoundView>& rounds)
{
    auto out = session(s);
    auto arr = nlohmann::json::array();
    for (const auto& r : rounds) {
        auto scores = nlohmann::json::array();
        auto attempts = nlohmann::json::array();
        for (const auto& rec : r.attempts) {
            scores.push_back(rec.score);
            attempts.push_back({{"attempt_index", rec.attempt_index},
                                {"score", rec.score},
                                {"player_aus", au_set_to_json(rec.player_au_set)},
                                {"captured_at", rec.captured_at},
                                {"client_capture_ms", rec.client_capture_ms}});
        }
        nlohmann::json jr{{"round_id", r.round_id},
                          {"round_number", r.round_number},
                          {"target_id", r.target->target_id},
                          {"emotion", std::string(to_string(r.target->emotion))},
                          {"status", std::string(to_string(r.status))},
                          {"attempts_remaining", r.attempts_remaining()},
                          {"scores", scores},
                          {"attempts", attempts}};
        if (r.status != RoundStatus::open) jr["target_aus"] = au_set_to_json(r.target->au_set);
        arr.push_back(std::move(jr));
    }
    out["rounds"] = std::move(arr);
    return out;
}

inline nlohmann::json target(const TargetEntry& t)
{
    return {{"target_id", t.target_id},
            {"emotion", std::string(to_string(t.emotion))},
            {"aus", au_set_to_json(t.au_set)},
            {"asset_ref", t.asset_ref}};
}

inline Emotion emotion_field(const nlohmann::json& body)
{
    if (!body.contains("emotion") || body["emotion"].is_null()) throw BadRequest("emotion label is required");
    const auto& e = body["emotion"];
    if (e.is_number_integer()) return emotion_from_int(e.get<int>());
    if (e.is_string()) return parse_emotion(e.get<std::string>());
    throw BadRequest("emotion must be a name or an integer code");
}

inline GrayImage image_field(const nlohmann::json& body, const char* key)
{
    if (!body.contains(key) || !body[key].is_string()) throw BadRequest(std::string(key) + " (base64 netpbm) is required");
    const auto bytes = base64::decode(body[key].get<std::string>());
    try {
        return decode_netpbm(bytes);
    } catch (const BadImage& e) {
        throw BadRequest(e.what());
    }
}

inline int status_for(const Error& e)
{
    if (dynamic_cast<const UnknownSession*>(&e) || dynamic_cast<const UnknownRound*>(&e)) return 404;
    if (dynamic_cast<const SessionComplete*>(&e) || dynamic_cast<const RoundExhausted*>(&e) ||
        dynamic_cast<const RoundClosed*>(&e) || dynamic_cast<const NoTargetAvailable*>(&e)) {
        return 409;
    }
    if (dynamic_cast<const PipelineError*>(&e) || dynamic_cast<const EmptyTargetAuSet*>(&e)) return 422;
    if (dynamic_cast<const BadRequest*>(&e) || dynamic_cast<const BadLandmarks*>(&e) ||
        dynamic_cast<const BadImage*>(&e) || dynamic_cast<const UnknownEmotion*>(&e) ||
        dynamic_cast<const UnknownAuCode*>(&e)) {
        return 400;
    }
    return 500;
}

/// "Kind: detail" -> {"error": "Kind", "message": "detail"}
inline nlohmann::json error_body(const std::string& what)
{
    const auto colon = what.find(": ");
    if (colon == std::string::npos) return {{"error", "Error"}, {"message", what}};
    return {{"error", what.substr(0, colon)}, {"message", what.substr(colon + 2)}};
}

} // namespace wire

class HttpApi
{
public:
    explicit HttpApi(GameService& service) : service_(service) { routes(); }

    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    /// Binds to `port`, or to a free port when `port` is 0. Returns the bound port.
    int bind(const std::string& host, int port)
    {
        if (port == 0) {
            const int p = server_.bind_to_any_port(host);
            if (p < 0) throw StoreError("cannot bind " + host);
            return p;
        }
        if (!server_.bind_to_port(host, port)) throw StoreError("cannot bind " + host + ":" + std::to_string(port));
        return port;
    }

    /// Serves until stop(). Call bind() first.
    void run() { server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

    /// Serves static files (the browser client) under "/".
    bool mount_static(const std::string& dir) { return server_.set_mount_point("/", dir); }

    httplib::Server& server() noexcept { return server_; }

private:
    template <class Fn>
    httplib::Server::Handler guarded(Fn fn)
    {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                auto [status, body] = fn(req);
                reply(res, status, body);
            } catch (const Error& e) {
                reply(res, wire::status_for(e), wire::error_body(e.what()));
            } catch (const nlohmann::json::exception& e) {
                reply(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", "Internal"}, {"message", e.what()}});
            }
        };
    }

    static void reply(httplib::Response& res, int status, const nlohmann::json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static nlohmann::json parse_body(const httplib::Request& req, bool required)
    {
        if (req.body.empty()) {
            if (required) throw BadRequest("request body is required");
            return nlohmann::json::object();
        }
        auto j = nlohmann::json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw BadRequest("body must be a JSON object");
        return j;
    }

    void routes()
    {
        using Result = std::pair<int, nlohmann::json>;
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Headers", "Content-Type"},
                                     {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.Post("/api/sessions", guarded([this](const httplib::Request& req) -> Result {
                         const auto body = parse_body(req, false);
                         SessionRequest sr;
                         if (body.contains("group_policy")) sr.policy = parse_group_policy(body["group_policy"].get<std::string>());
                         if (body.contains("group") && !body["group"].is_null()) sr.group = parse_group(body["group"].get<std::string>());
                         if (body.contains("player_meta")) sr.player_meta = body["player_meta"];
                         return {201, wire::session(service_.create_session(sr))};
                     }));

        server_.Post(R"(/api/sessions/([^/]+)/rounds)", guarded([this](const httplib::Request& req) -> Result {
                         return {201, wire::round_start(service_.start_round(req.matches[1]))};
                     }));

        server_.Post(R"(/api/rounds/([^/]+)/attempts)", guarded([this](const httplib::Request& req) -> Result {
                         const auto body = parse_body(req, true);
                         const GrayImage frame = wire::image_field(body, "frame");
                         if (!body.contains("landmarks")) throw BadRequest("landmarks are required");
                         const LandmarkSet landmarks = landmarks_from_json(body["landmarks"]);
                         std::int64_t capture_ms = 0;
                         if (body.contains("captured_at") && body["captured_at"].is_number()) {
                             capture_ms = body["captured_at"].get<std::int64_t>();
                         }
                         const auto result = service_.submit_attempt(req.matches[1], frame, landmarks, capture_ms);
                         return {200, wire::attempt(result)};
                     }));

        server_.Get(R"(/api/sessions/([^/]+)/history)", guarded([this](const httplib::Request& req) -> Result {
                        const std::string id = req.matches[1];
                        const auto rounds = service_.session_history(id);
                        return {200, wire::history(service_.session(id), rounds)};
                    }));

        server_.Get("/api/targets", guarded([this](const httplib::Request&) -> Result {
                        auto arr = nlohmann::json::array();
                        for (const auto& t : service_.targets().all()) arr.push_back(wire::target(*t));
                        return {200, {{"targets", arr}}};
                    }));

        server_.Post("/api/targets", guarded([this](const httplib::Request& req) -> Result {
                         const auto body = parse_body(req, true);
                         const Emotion emotion = wire::emotion_field(body);
                         if (!body.contains("target_id") || !body["target_id"].is_string()) {
                             throw BadRequest("target_id is required");
                         }
                         if (!body.contains("landmarks")) throw BadRequest("landmarks are required");
                         auto image = wire::image_field(body, "image");
                         const auto entry = service_.add_target(body["target_id"].get<std::string>(), std::move(image),
                                                                landmarks_from_json(body["landmarks"]), emotion);
                         return {201, wire::target(*entry)};
                     }));
    }

    GameService& service_;
    httplib::Server server_;
};

} // namespace facegame::game
