#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/au/classifier.hpp"
#include "facegame/explain/prescriptions.hpp"
#include "facegame/game/store.hpp"
#include "facegame/game/targets.hpp"
#include "facegame/util/time.hpp"

namespace facegame::game {

enum class GroupPolicy
{
    explicit_group,
    alternating,
    seeded_random,
};

inline std::string_view to_string(GroupPolicy p)
{
    switch (p) {
    case GroupPolicy::explicit_group: return "explicit";
    case GroupPolicy::alternating: return "alternating";
    case GroupPolicy::seeded_random: return "seeded-random";
    }
    return "?";
}

inline GroupPolicy parse_group_policy(std::string_view s)
{
    if (s == "explicit") return GroupPolicy::explicit_group;
    if (s == "alternating") return GroupPolicy::alternating;
    if (s == "seeded-random") return GroupPolicy::seeded_random;
    throw BadRequest("unknown group_policy '" + std::string(s) + "'");
}

enum class PlayMode
{
    experiment,
    free,
};

inline std::string_view to_string(PlayMode m) { return m == PlayMode::experiment ? "experiment" : "free"; }

inline PlayMode parse_play_mode(std::string_view s)
{
    if (s == "experiment") return PlayMode::experiment;
    if (s == "free") return PlayMode::free;
    throw BadRequest("unknown mode '" + std::string(s) + "'");
}

enum class RoundStatus
{
    open,
    exhausted,
    closed,
};

inline std::string_view to_string(RoundStatus s)
{
    switch (s) {
    case RoundStatus::open: return "open";
    case RoundStatus::exhausted: return "exhausted";
    case RoundStatus::closed: return "closed";
    }
    return "?";
}

inline constexpr int kExperimentRounds = static_cast<int>(kEmotionCount);

struct ServiceConfig
{
    int max_attempts = 5;
    PlayMode mode = PlayMode::experiment;
    std::uint64_t seed = 0;
    bool keep_frames = true;
    std::optional<fs::path> targets_dir; // where POST /api/targets persists new entries
};

struct SessionRequest
{
    GroupPolicy policy = GroupPolicy::alternating;
    std::optional<Group> group; // required by the explicit policy
    nlohmann::json player_meta;
};

struct SessionInfo
{
    std::string session_id;
    std::uint64_t ordinal = 0;
    Group group = Group::control;
    GroupPolicy policy = GroupPolicy::alternating;
    PlayMode mode = PlayMode::experiment;
    std::string created_at;
    nlohmann::json player_meta;
    std::array<Emotion, kEmotionCount> emotion_order{};
    int rounds_started = 0;
};

struct RoundView
{
    std::string round_id;
    std::string session_id;
    int round_number = 0;
    TargetCatalog::Ptr target;
    std::vector<RoundRecord> attempts;
    RoundStatus status = RoundStatus::open;
    int max_attempts = 0;

    int attempts_remaining() const
    {
        return status == RoundStatus::open ? max_attempts - static_cast<int>(attempts.size()) : 0;
    }
};

struct AttemptResult
{
    std::uint64_t record_id = 0;
    double score = 0.0;
    AUSet player_aus;
    explain::AuDiff diff;
    std::vector<explain::Prescription> prescriptions;
    int attempt_index = 0;
    int attempts_remaining = 0;
    bool retry_allowed = false;
};

// splitmix64 finalizer; derives independent per-session streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Emotion order for the session with the given ordinal. Fisher-Yates on raw
/// generator output so the order does not depend on the standard library.
inline std::array<Emotion, kEmotionCount> emotion_order_for(std::uint64_t seed, std::uint64_t ordinal)
{
    auto order = kAllEmotions;
    std::uint64_t state = mix_seed(seed, ordinal);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        state = mix_seed(state, i);
        std::swap(order[i], order[state % (i + 1)]);
    }
    return order;
}

inline Group seeded_group(std::uint64_t seed, std::uint64_t ordinal)
{
    return (mix_seed(seed ^ 0x5eedull, ordinal) >> 11 & 1u) ? Group::treatment : Group::control;
}

class GameService
{
public:
    GameService(ServiceConfig config, std::shared_ptr<TargetCatalog> targets,
                std::shared_ptr<const au::AuClassifier> classifier,
                std::shared_ptr<const explain::AuDictionary> dictionary, std::shared_ptr<RecordStore> store)
        : config_(std::move(config)), targets_(std::move(targets)), classifier_(std::move(classifier)),
          dictionary_(std::move(dictionary)), store_(std::move(store))
    {
        if (config_.max_attempts < 1) throw BadRequest("max_attempts must be at least 1");
        if (!targets_ || !classifier_ || !dictionary_ || !store_) throw BadRequest("service dependency missing");
        replay();
    }

    GameService(const GameService&) = delete;
    GameService& operator=(const GameService&) = delete;

    const ServiceConfig& config() const noexcept { return config_; }
    const TargetCatalog& targets() const noexcept { return *targets_; }
    RecordStore& store() noexcept { return *store_; }

    SessionInfo create_session(const SessionRequest& req)
    {
        if (req.policy == GroupPolicy::explicit_group && !req.group) {
            throw BadRequest("explicit group policy requires a group");
        }
        std::unique_lock lock(mutex_);
        const std::uint64_t ordinal = ++session_counter_;
        auto s = std::make_unique<Session>();
        auto& info = s->info;
        info.session_id = session_id_for(ordinal);
        info.ordinal = ordinal;
        info.policy = req.policy;
        info.mode = config_.mode;
        info.created_at = utc_now();
        info.player_meta = req.player_meta.is_null() ? nlohmann::json::object() : req.player_meta;
        info.emotion_order = emotion_order_for(config_.seed, ordinal);
        switch (req.policy) {
        case GroupPolicy::explicit_group: info.group = *req.group; break;
        case GroupPolicy::alternating:
            // whichever group is smaller so far; ties go to control
            info.group = group_counts_[1] < group_counts_[0] ? Group::treatment : Group::control;
            break;
        case GroupPolicy::seeded_random: info.group = seeded_group(config_.seed, ordinal); break;
        }
        store_->append_event(session_event(info));
        ++group_counts_[static_cast<std::size_t>(info.group)];
        SessionInfo out = info;
        sessions_.emplace(info.session_id, std::move(s));
        return out;
    }

    SessionInfo session(const std::string& session_id) const
    {
        Session& s = find_session(session_id);
        std::lock_guard lock(s.mutex);
        return s.info;
    }

    std::array<std::size_t, 2> group_counts() const
    {
        std::shared_lock lock(mutex_);
        return group_counts_;
    }

    /// Opens the next round; the previous open round, if any, is closed.
    RoundView start_round(const std::string& session_id)
    {
        Session& s = find_session(session_id);
        std::lock_guard session_lock(s.mutex);
        const int number = static_cast<int>(s.rounds.size()) + 1;
        if (s.info.mode == PlayMode::experiment && number > kExperimentRounds) {
            throw SessionComplete("session " + session_id + " has played all " + std::to_string(kExperimentRounds) +
                                  " rounds");
        }
        auto target = pick_target(s.info, number);
        auto round = std::make_unique<RoundState>();
        const std::uint64_t seq = ++round_counter_;
        round->round_id = round_id_for(seq);
        round->round_number = number;
        round->target = std::move(target);
        store_->append_event({{"type", "round"},
                              {"round_id", round->round_id},
                              {"round_seq", seq},
                              {"session_id", session_id},
                              {"round_number", number},
                              {"target_id", round->target->target_id},
                              {"emotion", to_int(round->target->emotion)},
                              {"started_at", utc_now()}});
        if (!s.rounds.empty() && s.rounds.back()->status == RoundStatus::open) s.rounds.back()->status = RoundStatus::closed;
        RoundState* raw = round.get();
        s.rounds.push_back(std::move(round));
        s.info.rounds_started = number;
        {
            std::unique_lock lock(mutex_);
            rounds_.emplace(raw->round_id, RoundRef{&s, raw});
        }
        return view(s, *raw);
    }

    /// Scores one attempt. Pipeline failures are logged and do not consume an attempt.
    AttemptResult submit_attempt(const std::string& round_id, const GrayImage& frame, const LandmarkSet& landmarks,
                                 std::int64_t client_capture_ms)
    {
        const RoundRef ref = find_round(round_id);
        Session& s = *ref.session;
        RoundState& r = *ref.round;
        std::lock_guard session_lock(s.mutex);
        if (r.status == RoundStatus::closed) throw RoundClosed("round " + round_id + " is closed");
        if (r.status == RoundStatus::exhausted) {
            throw RoundExhausted("round " + round_id + " used all " + std::to_string(config_.max_attempts) + " attempts");
        }

        AUSet player;
        try {
            player = classifier_->detect(frame, landmarks);
        } catch (const Error& e) {
            store_->append_failure({{"session_id", s.info.session_id},
                                    {"round_id", round_id},
                                    {"received_at", utc_now()},
                                    {"client_capture_ms", client_capture_ms},
                                    {"error", e.what()}});
            throw PipelineError(e.what());
        }

        const AUSet target = r.target->au_set;
        AttemptResult result;
        result.record_id = store_->reserve_record_id();
        result.player_aus = player;
        result.score = explain::score(player, target);
        result.diff = explain::diff(player, target);
        if (s.info.group == Group::treatment) result.prescriptions = explain::prescribe(player, target, *dictionary_);
        result.attempt_index = static_cast<int>(r.attempts.size()) + 1;

        RoundRecord rec;
        rec.record_id = result.record_id;
        rec.session_id = s.info.session_id;
        rec.round_id = round_id;
        rec.target_id = r.target->target_id;
        rec.emotion = r.target->emotion;
        rec.group = s.info.group;
        rec.attempt_index = result.attempt_index;
        rec.player_au_set = player;
        rec.target_au_set = target;
        rec.score = result.score;
        rec.prescriptions_shown = !result.prescriptions.empty();
        if (config_.keep_frames) rec.frame_ref = store_->save_frame(rec.record_id, frame);
        rec.captured_at = utc_now();
        rec.client_capture_ms = client_capture_ms;
        store_->append(rec);

        r.attempts.push_back(std::move(rec));
        if (static_cast<int>(r.attempts.size()) >= config_.max_attempts) r.status = RoundStatus::exhausted;
        result.attempts_remaining = config_.max_attempts - static_cast<int>(r.attempts.size());
        result.retry_allowed = result.attempts_remaining > 0;
        return result;
    }

    std::vector<RoundView> session_history(const std::string& session_id) const
    {
        Session& s = find_session(session_id);
        std::lock_guard lock(s.mutex);
        std::vector<RoundView> out;
        out.reserve(s.rounds.size());
        for (const auto& r : s.rounds) out.push_back(view(s, *r));
        return out;
    }

    RoundView round(const std::string& round_id) const
    {
        const RoundRef ref = find_round(round_id);
        std::lock_guard lock(ref.session->mutex);
        return view(*ref.session, *ref.round);
    }

    /// Operator ingestion: detect AUs, add to the catalog, persist if configured.
    TargetCatalog::Ptr add_target(std::string target_id, GrayImage image, const LandmarkSet& landmarks, Emotion emotion)
    {
        if (targets_->find(target_id)) throw BadRequest("duplicate target_id '" + target_id + "'");
        auto entry = ingest_target(target_id, std::move(image), landmarks, emotion, *classifier_, target_id + ".pgm");
        if (config_.targets_dir) save_target(*config_.targets_dir, entry);
        targets_->add(std::move(entry));
        return targets_->find(target_id);
    }

private:
    struct RoundState
    {
        std::string round_id;
        int round_number = 0;
        TargetCatalog::Ptr target;
        std::vector<RoundRecord> attempts;
        RoundStatus status = RoundStatus::open;
    };

    struct Session
    {
        SessionInfo info;
        mutable std::mutex mutex;
        std::vector<std::unique_ptr<RoundState>> rounds;
    };

    struct RoundRef
    {
        Session* session;
        RoundState* round;
    };

    static std::string session_id_for(std::uint64_t n)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(n));
        return buf;
    }

    static std::string round_id_for(std::uint64_t n)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "r%06llu", static_cast<unsigned long long>(n));
        return buf;
    }

    static nlohmann::json session_event(const SessionInfo& info)
    {
        auto order = nlohmann::json::array();
        for (auto e : info.emotion_order) order.push_back(to_int(e));
        return {{"type", "session"},
                {"session_id", info.session_id},
                {"ordinal", info.ordinal},
                {"group", std::string(to_string(info.group))},
                {"policy", std::string(to_string(info.policy))},
                {"mode", std::string(to_string(info.mode))},
                {"created_at", info.created_at},
                {"player_meta", info.player_meta},
                {"emotion_order", order}};
    }

    RoundView view(const Session& s, const RoundState& r) const
    {
        return {r.round_id, s.info.session_id, r.round_number, r.target, r.attempts, r.status, config_.max_attempts};
    }

    Session& find_session(const std::string& id) const
    {
        std::shared_lock lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession("'" + id + "'");
        return *it->second;
    }

    RoundRef find_round(const std::string& id) const
    {
        std::shared_lock lock(mutex_);
        auto it = rounds_.find(id);
        if (it == rounds_.end()) throw UnknownRound("'" + id + "'");
        return it->second;
    }

    TargetCatalog::Ptr pick_target(const SessionInfo& info, int round_number) const
    {
        if (info.mode == PlayMode::experiment) {
            const Emotion e = info.emotion_order[static_cast<std::size_t>(round_number - 1)];
            const auto candidates = targets_->by_emotion(e);
            if (candidates.empty()) throw NoTargetAvailable("no target for emotion " + std::string(to_string(e)));
            return candidates[mix_seed(config_.seed, info.ordinal * 8 + static_cast<std::uint64_t>(e)) % candidates.size()];
        }
        const auto all = targets_->all();
        if (all.empty()) throw NoTargetAvailable("target catalog is empty");
        return all[mix_seed(config_.seed, info.ordinal * 1000003ull + static_cast<std::uint64_t>(round_number)) % all.size()];
    }

    // Rebuilds sessions and rounds from an existing store so that a restarted
    // server resumes where it stopped.
    void replay()
    {
        for (const auto& ev : store_->events()) {
            const std::string type = ev.value("type", "");
            if (type == "session") {
                auto s = std::make_unique<Session>();
                auto& info = s->info;
                info.session_id = ev.at("session_id").get<std::string>();
                info.ordinal = ev.at("ordinal").get<std::uint64_t>();
                info.group = parse_group(ev.at("group").get<std::string>());
                info.policy = parse_group_policy(ev.at("policy").get<std::string>());
                info.mode = parse_play_mode(ev.at("mode").get<std::string>());
                info.created_at = ev.at("created_at").get<std::string>();
                info.player_meta = ev.value("player_meta", nlohmann::json::object());
                const auto& order = ev.at("emotion_order");
                for (std::size_t i = 0; i < kEmotionCount; ++i) info.emotion_order[i] = emotion_from_int(order.at(i).get<int>());
                session_counter_ = std::max(session_counter_, info.ordinal);
                ++group_counts_[static_cast<std::size_t>(info.group)];
                sessions_.emplace(info.session_id, std::move(s));
            } else if (type == "round") {
                const std::string sid = ev.at("session_id").get<std::string>();
                auto it = sessions_.find(sid);
                if (it == sessions_.end()) throw StoreError("round event for unknown session " + sid);
                Session& s = *it->second;
                const std::string tid = ev.at("target_id").get<std::string>();
                auto target = targets_->find(tid);
                if (!target) throw StoreError("store references target '" + tid + "' which is not in the catalog");
                auto round = std::make_unique<RoundState>();
                round->round_id = ev.at("round_id").get<std::string>();
                round->round_number = ev.at("round_number").get<int>();
                round->target = std::move(target);
                if (!s.rounds.empty() && s.rounds.back()->status == RoundStatus::open) s.rounds.back()->status = RoundStatus::closed;
                rounds_.emplace(round->round_id, RoundRef{&s, round.get()});
                s.rounds.push_back(std::move(round));
                s.info.rounds_started = static_cast<int>(s.rounds.size());
                round_counter_ = std::max<std::uint64_t>(round_counter_, ev.at("round_seq").get<std::uint64_t>());
            }
        }
        for (auto& rec : store_->records()) {
            auto it = rounds_.find(rec.round_id);
            if (it == rounds_.end()) throw StoreError("record " + std::to_string(rec.record_id) + " names unknown round");
            RoundState& r = *it->second.round;
            r.attempts.push_back(std::move(rec));
            if (static_cast<int>(r.attempts.size()) >= config_.max_attempts) r.status = RoundStatus::exhausted;
        }
    }

    ServiceConfig config_;
    std::shared_ptr<TargetCatalog> targets_;
    std::shared_ptr<const au::AuClassifier> classifier_;
    std::shared_ptr<const explain::AuDictionary> dictionary_;
    std::shared_ptr<RecordStore> store_;

    // Lock order: a session mutex may be held while taking mutex_, never the reverse.
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::unique_ptr<Session>> sessions_;
    std::unordered_map<std::string, RoundRef> rounds_;
    std::uint64_t session_counter_ = 0;
    std::atomic<std::uint64_t> round_counter_{0};
    std::array<std::size_t, 2> group_counts_{};
};

} // namespace facegame::game
