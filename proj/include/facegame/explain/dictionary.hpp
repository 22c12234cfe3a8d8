#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/core/action_unit.hpp"
#include "facegame/error.hpp"

namespace facegame::explain {

enum class Region
{
    cheeks,
    eyebrows,
    eyelids,
    lips,
    chin_and_nose,
    mouth,
    horizontal,
    oblique,
    orbital,
};

inline constexpr std::array<std::string_view, 9> kRegionNames{
    "cheeks", "eyebrows", "eyelids", "lips", "chin-and-nose", "mouth", "horizontal", "oblique", "orbital"};

inline std::string_view to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }

inline Region parse_region(std::string_view s)
{
    for (std::size_t i = 0; i < kRegionNames.size(); ++i) {
        if (kRegionNames[i] == s) return static_cast<Region>(i);
    }
    throw BadDictionary("unknown region '" + std::string(s) + "'");
}

struct DictionaryEntry
{
    ActionUnit au{1};
    Region region = Region::eyebrows;
    std::string description;
    std::string prescribe_pos;
    std::string prescribe_neg;
};

// Multi-AU entries are accepted and kept, but prescriptions are rendered per AU.
struct CombinationEntry
{
    AUSet aus;
    Region region = Region::eyebrows;
    std::string description;
    std::string prescribe_pos;
    std::string prescribe_neg;
};

class AuDictionary
{
public:
    /// Throws BadDictionary unless every catalog AU has exactly one entry with
    /// non-empty texts. Region precedence is the order regions first appear.
    AuDictionary(std::vector<DictionaryEntry> entries, std::vector<CombinationEntry> combinations = {})
        : combinations_(std::move(combinations))
    {
        std::array<bool, kAuCount> seen{};
        region_rank_.fill(static_cast<int>(kRegionNames.size()));
        int next_rank = 0;
        for (auto& e : entries) {
            if (seen[e.au.index()]) throw BadDictionary("duplicate entry for " + e.au.label());
            if (e.description.empty() || e.prescribe_pos.empty() || e.prescribe_neg.empty()) {
                throw BadDictionary("empty text for " + e.au.label());
            }
            seen[e.au.index()] = true;
            auto& rank = region_rank_[static_cast<std::size_t>(e.region)];
            if (rank == static_cast<int>(kRegionNames.size())) rank = next_rank++;
            entries_[e.au.index()] = std::move(e);
        }
        for (std::size_t k = 0; k < kAuCount; ++k) {
            if (!seen[k]) throw BadDictionary("missing entry for " + ActionUnit::from_index(k).label());
        }
    }

    const DictionaryEntry& entry(ActionUnit au) const { return *entries_[au.index()]; }
    const std::vector<CombinationEntry>& combinations() const noexcept { return combinations_; }

    int region_rank(Region r) const { return region_rank_[static_cast<std::size_t>(r)]; }

    /// Display order: region precedence, then ascending AU code.
    bool precedes(ActionUnit a, ActionUnit b) const
    {
        const int ra = region_rank(entry(a).region);
        const int rb = region_rank(entry(b).region);
        return ra != rb ? ra < rb : a.code() < b.code();
    }

private:
    std::array<std::optional<DictionaryEntry>, kAuCount> entries_;
    std::array<int, kRegionNames.size()> region_rank_{};
    std::vector<CombinationEntry> combinations_;
};

// Dictionary file: a JSON object with an "entries" array. Each element is
//   { "au": 4, "region": "eyebrows", "description": "...",
//     "prescribe_pos": "...", "prescribe_neg": "..." }
// An element keyed by "aus": [codes...] instead of "au" is a combination entry.
inline AuDictionary dictionary_from_json(const nlohmann::json& j)
{
    try {
        std::vector<DictionaryEntry> entries;
        std::vector<CombinationEntry> combos;
        for (const auto& ej : j.at("entries")) {
            const auto region = parse_region(ej.at("region").get<std::string>());
            auto desc = ej.at("description").get<std::string>();
            auto pos = ej.at("prescribe_pos").get<std::string>();
            auto neg = ej.at("prescribe_neg").get<std::string>();
            if (ej.contains("aus")) {
                AUSet set = au_set_from_codes(ej["aus"].get<std::vector<int>>());
                if (set.size() < 2) throw BadDictionary("combination entry needs at least two AUs");
                combos.push_back({set, region, std::move(desc), std::move(pos), std::move(neg)});
            } else {
                entries.push_back({ActionUnit(ej.at("au").get<int>()), region, std::move(desc), std::move(pos), std::move(neg)});
            }
        }
        return AuDictionary(std::move(entries), std::move(combos));
    } catch (const nlohmann::json::exception& e) {
        throw BadDictionary(e.what());
    } catch (const UnknownAuCode& e) {
        throw BadDictionary(e.what());
    }
}

inline AuDictionary load_dictionary(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw BadDictionary("cannot open " + path.string());
    try {
        return dictionary_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw BadDictionary(path.string() + ": " + e.what());
    }
}

} // namespace facegame::explain
