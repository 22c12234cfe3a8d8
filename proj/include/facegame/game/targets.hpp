#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/au/classifier.hpp"
#include "facegame/core/records.hpp"
#include "facegame/error.hpp"

// Target catalog. A targets directory holds one JSON sidecar per target:
//
//   { "target_id": "happy-01", "image": "happy-01.pgm", "emotion": "happiness",
//     "landmarks": [[x, y], ... 68 pairs] }
//
// The AU set is never read from disk; it is recomputed by the loaded model at
// ingestion so that targets and players are scored by the same detector.
namespace facegame::game {

namespace fs = std::filesystem;

/// Runs the detector on an operator-labelled image. Targets with no detected
/// AU would score every attempt 0 and are rejected.
inline TargetEntry ingest_target(std::string target_id, GrayImage image, const LandmarkSet& landmarks, Emotion emotion,
                                 const au::AuClassifier& classifier, std::string asset_ref = {})
{
    if (target_id.empty()) throw BadRequest("target_id must not be empty");
    AUSet aus;
    try {
        aus = classifier.detect(image, landmarks);
    } catch (const Error& e) {
        throw PipelineError(e.what());
    }
    if (aus.empty()) throw EmptyTargetAuSet("no AU detected on target '" + target_id + "'");
    TargetEntry t;
    t.target_id = std::move(target_id);
    t.image = std::move(image);
    t.asset_ref = std::move(asset_ref);
    t.emotion = emotion;
    t.au_set = aus;
    t.landmarks = landmarks;
    return t;
}

class TargetCatalog
{
public:
    using Ptr = std::shared_ptr<const TargetEntry>;

    void add(TargetEntry t)
    {
        std::unique_lock lock(mutex_);
        for (const auto& e : entries_) {
            if (e->target_id == t.target_id) throw BadRequest("duplicate target_id '" + t.target_id + "'");
        }
        entries_.push_back(std::make_shared<const TargetEntry>(std::move(t)));
    }

    Ptr find(std::string_view id) const
    {
        std::shared_lock lock(mutex_);
        for (const auto& e : entries_) {
            if (e->target_id == id) return e;
        }
        return nullptr;
    }

    std::vector<Ptr> all() const
    {
        std::shared_lock lock(mutex_);
        return entries_;
    }

    std::vector<Ptr> by_emotion(Emotion emotion) const
    {
        std::shared_lock lock(mutex_);
        std::vector<Ptr> out;
        for (const auto& e : entries_) {
            if (e->emotion == emotion) out.push_back(e);
        }
        return out;
    }

    std::size_t size() const
    {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::shared_mutex mutex_;
    std::vector<Ptr> entries_;
};

inline nlohmann::json target_sidecar(const TargetEntry& t, const std::string& image_file)
{
    return {{"target_id", t.target_id},
            {"image", image_file},
            {"emotion", std::string(to_string(t.emotion))},
            {"landmarks", landmarks_to_json(t.landmarks)}};
}

/// Writes <id>.pgm and <id>.json into `dir`.
inline void save_target(const fs::path& dir, const TargetEntry& t)
{
    fs::create_directories(dir);
    const std::string image_file = t.target_id + ".pgm";
    write_pgm(dir / image_file, t.image);
    std::ofstream out(dir / (t.target_id + ".json"));
    if (!out) throw StoreError("cannot write target sidecar in " + dir.string());
    out << target_sidecar(t, image_file).dump(2) << '\n';
}

/// Loads every *.json sidecar in `dir`, in file-name order.
inline void load_target_dir(const fs::path& dir, const au::AuClassifier& classifier, TargetCatalog& catalog)
{
    if (!fs::is_directory(dir)) throw StoreError("targets directory not found: " + dir.string());
    std::vector<fs::path> sidecars;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") sidecars.push_back(entry.path());
    }
    std::sort(sidecars.begin(), sidecars.end());
    for (const auto& path : sidecars) {
        std::ifstream in(path);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw BadRequest(path.string() + ": not a JSON object");
        try {
            const std::string image_file = j.at("image").get<std::string>();
            const std::string id = j.value("target_id", path.stem().string());
            catalog.add(ingest_target(id, read_image(dir / image_file), landmarks_from_json(j.at("landmarks")),
                                      parse_emotion(j.at("emotion").get<std::string>()), classifier, image_file));
        } catch (const nlohmann::json::exception& e) {
            throw BadRequest(path.string() + ": " + e.what());
        }
    }
}

} // namespace facegame::game
