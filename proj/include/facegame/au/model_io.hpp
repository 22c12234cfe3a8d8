#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "facegame/au/model.hpp"

namespace facegame::au {

inline constexpr std::string_view kModelFormatName = "facegame-au-model";

// Model file layout (JSON, numbers written in shortest round-trip decimal):
//
//   { "format": "facegame-au-model", "version": 1, "feature_size": N,
//     "feature_mean": [N], "feature_std": [N],
//     "heads": [ { "au": code, "bias": b, "threshold": t, "weights": [N] } x 20 ] }
//
// Heads appear in catalog order.
inline nlohmann::json model_to_json(const AuModel& m)
{
    nlohmann::json j;
    j["format"] = kModelFormatName;
    j["version"] = m.version;
    j["feature_size"] = m.feature_size();
    j["feature_mean"] = m.feature_mean;
    j["feature_std"] = m.feature_std;
    auto heads = nlohmann::json::array();
    for (std::size_t k = 0; k < kAuCount; ++k) {
        const auto& h = m.heads[k];
        heads.push_back({{"au", kAuCatalog[k].code}, {"bias", h.bias}, {"threshold", h.threshold}, {"weights", h.weights}});
    }
    j["heads"] = std::move(heads);
    return j;
}

inline AuModel model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != kModelFormatName) {
            throw BadModelFile("format tag is '" + j.at("format").get<std::string>() + "'");
        }
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw BadModelFile("version mismatch: expected " + std::to_string(kModelFormatVersion) + ", found " +
                               std::to_string(version));
        }
        const auto n = j.at("feature_size").get<std::size_t>();
        AuModel m;
        m.version = version;
        m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
        m.feature_std = j.at("feature_std").get<std::vector<double>>();
        if (m.feature_mean.size() != n || m.feature_std.size() != n) {
            throw BadModelFile("feature_mean/feature_std length differs from feature_size " + std::to_string(n));
        }
        for (double s : m.feature_std) {
            if (!(s > 0.0)) throw BadModelFile("feature_std must be positive");
        }
        const auto& heads = j.at("heads");
        if (!heads.is_array() || heads.size() != kAuCount) {
            throw BadModelFile("expected 20 heads, found " + std::to_string(heads.size()));
        }
        for (std::size_t k = 0; k < kAuCount; ++k) {
            const auto& hj = heads[k];
            const int code = hj.at("au").get<int>();
            if (code != kAuCatalog[k].code) {
                throw BadModelFile("head " + std::to_string(k) + " is AU" + std::to_string(code) + ", expected AU" +
                                   std::to_string(kAuCatalog[k].code));
            }
            auto& h = m.heads[k];
            h.bias = hj.at("bias").get<double>();
            h.threshold = hj.at("threshold").get<double>();
            if (!(h.threshold > 0.0 && h.threshold < 1.0)) {
                throw BadModelFile("threshold for AU" + std::to_string(code) + " outside (0,1)");
            }
            h.weights = hj.at("weights").get<std::vector<double>>();
            if (h.weights.size() != n) throw BadModelFile("weights for AU" + std::to_string(code) + " have wrong length");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw BadModelFile(std::string("malformed field: ") + e.what());
    }
}

inline void save_model(const AuModel& m, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw BadModelFile("cannot write " + path.string());
    out << model_to_json(m).dump() << '\n';
    if (!out) throw BadModelFile("write failed for " + path.string());
}

inline AuModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw BadModelFile("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw BadModelFile(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace facegame::au
