#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "facegame/au/trainer.hpp"
#include "facegame/core/records.hpp"
#include "facegame/features/pipeline.hpp"

// AU training manifest: JSON lines, each
//   {"image": "<path relative to the manifest>", "landmarks": [[x, y] x 68], "aus": [codes]}
namespace facegame::au {

namespace fs = std::filesystem;

struct AuManifestEntry
{
    std::string image;
    LandmarkSet landmarks;
    AUSet aus;
};

inline nlohmann::json to_json(const AuManifestEntry& e)
{
    return {{"image", e.image}, {"landmarks", landmarks_to_json(e.landmarks)}, {"aus", au_set_to_json(e.aus)}};
}

inline std::vector<AuManifestEntry> read_au_manifest(const fs::path& manifest)
{
    std::ifstream in(manifest);
    if (!in) throw BadImage("cannot open AU manifest " + manifest.string());
    std::vector<AuManifestEntry> out;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back({j.at("image").get<std::string>(), landmarks_from_json(j.at("landmarks")),
                           au_set_from_json(j.at("aus"))});
        } catch (const nlohmann::json::exception& e) {
            throw BadImage(manifest.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

/// Reads each image and runs the feature pipeline.
inline AuTrainingSet load_au_training_set(const fs::path& manifest, const features::PipelineParams& params = {})
{
    const auto base = manifest.parent_path();
    AuTrainingSet data;
    for (const auto& e : read_au_manifest(manifest)) {
        data.push_back({features::extract_features(read_image(base / e.image), e.landmarks, params), e.aus});
    }
    return data;
}

} // namespace facegame::au
