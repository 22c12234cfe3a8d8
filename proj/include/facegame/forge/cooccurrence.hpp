#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "facegame/core/image.hpp"
#include "facegame/forge/dataset.hpp"

namespace facegame::forge {

// counts[e][k]: kept records whose target emotion is e and whose player AU set
// contains catalog AU k. Rows follow the emotion encoding, columns the catalog.
struct CooccurrenceMatrix
{
    std::array<std::array<std::uint64_t, kAuCount>, kEmotionCount> counts{};
    std::size_t records_used = 0;
    double threshold = 0.0;

    std::uint64_t at(Emotion e, ActionUnit au) const { return counts[static_cast<std::size_t>(to_int(e))][au.index()]; }

    std::uint64_t row_sum(Emotion e) const
    {
        std::uint64_t s = 0;
        for (auto c : counts[static_cast<std::size_t>(to_int(e))]) s += c;
        return s;
    }

    std::uint64_t total() const
    {
        std::uint64_t s = 0;
        for (auto e : kAllEmotions) s += row_sum(e);
        return s;
    }

    std::uint64_t max_cell() const
    {
        std::uint64_t m = 0;
        for (const auto& row : counts) m = std::max(m, *std::max_element(row.begin(), row.end()));
        return m;
    }

    /// Most frequent AU in the row; ties resolve to the lower catalog index.
    ActionUnit argmax(Emotion e) const
    {
        const auto& row = counts[static_cast<std::size_t>(to_int(e))];
        return ActionUnit::from_index(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
};

inline CooccurrenceMatrix cooccurrence(const std::vector<RoundRecord>& records, double threshold)
{
    CooccurrenceMatrix m;
    m.threshold = threshold;
    for (const auto& r : filter_records(records, threshold)) {
        ++m.records_used;
        auto& row = m.counts[static_cast<std::size_t>(to_int(r.emotion))];
        for (auto au : r.player_au_set.members()) ++row[au.index()];
    }
    return m;
}

/// Fixed-width table: a header of AU labels, then one row per emotion.
inline std::string to_text(const CooccurrenceMatrix& m)
{
    std::string out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "# threshold %.6f, records %zu\n", m.threshold, m.records_used);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-10s", "emotion");
    out += buf;
    for (const auto& e : kAuCatalog) {
        std::snprintf(buf, sizeof buf, " %6s", ActionUnit(e.code).label().c_str());
        out += buf;
    }
    out += '\n';
    for (auto e : kAllEmotions) {
        std::snprintf(buf, sizeof buf, "%-10s", std::string(to_string(e)).c_str());
        out += buf;
        for (std::size_t k = 0; k < kAuCount; ++k) {
            std::snprintf(buf, sizeof buf, " %6llu", static_cast<unsigned long long>(m.counts[static_cast<std::size_t>(to_int(e))][k]));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline constexpr int kHeatmapCell = 16;

/// Grayscale raster, one kHeatmapCell-square block per matrix cell, intensity
/// proportional to the count relative to the largest cell.
inline GrayImage heatmap_raster(const CooccurrenceMatrix& m)
{
    GrayImage img(static_cast<int>(kAuCount) * kHeatmapCell, static_cast<int>(kEmotionCount) * kHeatmapCell);
    const double peak = static_cast<double>(m.max_cell());
    if (peak == 0.0) return img;
    for (std::size_t e = 0; e < kEmotionCount; ++e) {
        for (std::size_t k = 0; k < kAuCount; ++k) {
            const double v = static_cast<double>(m.counts[e][k]) / peak;
            for (int y = 0; y < kHeatmapCell; ++y) {
                for (int x = 0; x < kHeatmapCell; ++x) {
                    img.set(static_cast<int>(k) * kHeatmapCell + x, static_cast<int>(e) * kHeatmapCell + y, v);
                }
            }
        }
    }
    return img;
}

/// Writes the text table to `out_path` and the raster next to it with a .pgm
/// extension. Returns the raster path.
inline fs::path render_heatmap(const CooccurrenceMatrix& m, const fs::path& out_path)
{
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw StoreError("cannot write " + out_path.string());
    out << to_text(m);
    fs::path raster = out_path;
    raster.replace_extension(".pgm");
    if (raster == out_path) raster += ".pgm";
    write_pgm(raster, heatmap_raster(m));
    return raster;
}

} // namespace facegame::forge
