#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "facegame/explain/dictionary.hpp"
#include "facegame/explain/scoring.hpp"

namespace facegame::explain {

enum class Polarity
{
    add,    // AU missing from the player's face
    remove, // AU the player shows but the target does not
};

inline std::string_view to_string(Polarity p) { return p == Polarity::add ? "add" : "remove"; }

struct Prescription
{
    ActionUnit au{1};
    Polarity polarity = Polarity::add;
    std::string text;
    Region region = Region::eyebrows;

    friend bool operator==(const Prescription&, const Prescription&) = default;
};

/// One instruction per AU of the symmetric difference: add for T - P, remove
/// for P - T. Empty iff P == T.
inline std::vector<Prescription> prescribe(AUSet player, AUSet target, const AuDictionary& dict)
{
    const auto d = diff(player, target);
    std::vector<Prescription> out;
    for (auto au : d.missing.members()) {
        const auto& e = dict.entry(au);
        out.push_back({au, Polarity::add, e.prescribe_pos, e.region});
    }
    for (auto au : d.spurious.members()) {
        const auto& e = dict.entry(au);
        out.push_back({au, Polarity::remove, e.prescribe_neg, e.region});
    }
    std::sort(out.begin(), out.end(), [&](const Prescription& a, const Prescription& b) { return dict.precedes(a.au, b.au); });
    return out;
}

inline std::vector<std::string> describe(AUSet set, const AuDictionary& dict)
{
    auto members = set.members();
    std::sort(members.begin(), members.end(), [&](ActionUnit a, ActionUnit b) { return dict.precedes(a, b); });
    std::vector<std::string> out;
    out.reserve(members.size());
    for (auto au : members) out.push_back(dict.entry(au).description);
    return out;
}

} // namespace facegame::explain
