#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/core/records.hpp"
#include "facegame/error.hpp"

// Export layout written by export_dataset():
//
//   <out>/manifest.jsonl   one kept record per line, fields in this order:
//                          record_id, frame_ref, emotion, emotion_name, au_set,
//                          score, session_id, round_id, attempt_index
//   <out>/summary.json     threshold, rule, counts, per-emotion histogram,
//                          record ids whose frame was missing
//   <out>/images/<emotion_name>/<record_id>.pgm
//
// frame_ref is relative to <out>, or null when the source frame was missing.
// The same manifest layout is what the FER loader reads, so third-party
// datasets can be dropped in by writing frame_ref + emotion lines.
namespace facegame::forge {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kKeepRule = "score >= threshold";

inline void check_threshold(double threshold)
{
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw BadRequest("threshold must lie in [0, 1]");
}

/// Keeps records with score >= threshold; only strictly lower scores are dropped.
inline std::vector<RoundRecord> filter_records(const std::vector<RoundRecord>& records, double threshold)
{
    check_threshold(threshold);
    std::vector<RoundRecord> out;
    for (const auto& r : records) {
        if (r.score >= threshold) out.push_back(r);
    }
    return out;
}

struct ManifestEntry
{
    std::uint64_t record_id = 0;
    std::optional<std::string> frame_ref;
    Emotion emotion = Emotion::anger;
    AUSet au_set;
    double score = 0.0;
    std::string session_id;
    std::string round_id;
    int attempt_index = 0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Histogram = std::array<std::size_t, kEmotionCount>;

struct ExportManifest
{
    double threshold = 0.0;
    std::vector<ManifestEntry> entries;
    Histogram histogram{};
    std::vector<std::uint64_t> missing_frames;
};

inline nlohmann::ordered_json to_json(const ManifestEntry& e)
{
    nlohmann::ordered_json j;
    j["record_id"] = e.record_id;
    j["frame_ref"] = e.frame_ref ? nlohmann::ordered_json(*e.frame_ref) : nlohmann::ordered_json(nullptr);
    j["emotion"] = to_int(e.emotion);
    j["emotion_name"] = to_string(e.emotion);
    j["au_set"] = e.au_set.codes();
    j["score"] = e.score;
    j["session_id"] = e.session_id;
    j["round_id"] = e.round_id;
    j["attempt_index"] = e.attempt_index;
    return j;
}

inline ManifestEntry manifest_entry_from_json(const nlohmann::json& j)
{
    ManifestEntry e;
    e.record_id = j.at("record_id").get<std::uint64_t>();
    if (!j.at("frame_ref").is_null()) e.frame_ref = j["frame_ref"].get<std::string>();
    e.emotion = emotion_from_int(j.at("emotion").get<int>());
    e.au_set = au_set_from_json(j.at("au_set"));
    e.score = j.at("score").get<double>();
    e.session_id = j.at("session_id").get<std::string>();
    e.round_id = j.value("round_id", "");
    e.attempt_index = j.at("attempt_index").get<int>();
    return e;
}

inline nlohmann::ordered_json summary_json(const ExportManifest& m, std::size_t records_in)
{
    nlohmann::ordered_json j;
    j["threshold"] = m.threshold;
    j["rule"] = kKeepRule;
    j["records_in"] = records_in;
    j["records_kept"] = m.entries.size();
    nlohmann::ordered_json hist;
    for (auto e : kAllEmotions) hist[std::string(to_string(e))] = m.histogram[static_cast<std::size_t>(to_int(e))];
    j["histogram"] = hist;
    j["histogram_counts"] = m.histogram;
    j["missing_frames"] = m.missing_frames;
    return j;
}

/// Filters, copies frames and writes manifest + summary. A record whose frame
/// is absent is still exported (frame_ref null) and listed in missing_frames;
/// with `strict` it raises MissingFrame instead.
inline ExportManifest export_dataset(const std::vector<RoundRecord>& records, double threshold, const fs::path& store_dir,
                                     const fs::path& out_dir, bool strict = false)
{
    ExportManifest m;
    m.threshold = threshold;
    const auto kept = filter_records(records, threshold);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw StoreError("cannot create " + out_dir.string() + ": " + ec.message());

    std::ofstream manifest(out_dir / kManifestFile, std::ios::trunc);
    if (!manifest) throw StoreError("cannot write " + (out_dir / kManifestFile).string());
    for (const auto& r : kept) {
        ManifestEntry e{r.record_id, std::nullopt, r.emotion, r.player_au_set, r.score, r.session_id, r.round_id,
                        r.attempt_index};
        const fs::path src = r.frame_ref ? store_dir / *r.frame_ref : fs::path();
        if (r.frame_ref && fs::is_regular_file(src)) {
            const fs::path rel = fs::path("images") / std::string(to_string(r.emotion)) / (std::to_string(r.record_id) + ".pgm");
            fs::create_directories((out_dir / rel).parent_path());
            fs::copy_file(src, out_dir / rel, fs::copy_options::overwrite_existing, ec);
            if (ec) throw StoreError("cannot copy " + src.string() + ": " + ec.message());
            e.frame_ref = rel.generic_string();
        } else {
            if (strict) throw MissingFrame("record " + std::to_string(r.record_id) + " has no frame at '" + src.string() + "'");
            m.missing_frames.push_back(r.record_id);
        }
        ++m.histogram[static_cast<std::size_t>(to_int(r.emotion))];
        manifest << to_json(e).dump() << '\n';
        m.entries.push_back(std::move(e));
    }

    std::ofstream summary(out_dir / kSummaryFile, std::ios::trunc);
    if (!summary) throw StoreError("cannot write " + (out_dir / kSummaryFile).string());
    summary << summary_json(m, records.size()).dump(2) << '\n';
    return m;
}

inline std::vector<ManifestEntry> read_manifest(const fs::path& out_dir)
{
    std::ifstream in(out_dir / kManifestFile);
    if (!in) throw StoreError("no manifest in " + out_dir.string());
    std::vector<ManifestEntry> out;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) out.push_back(manifest_entry_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

} // namespace facegame::forge
