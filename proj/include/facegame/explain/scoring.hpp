#pragma once

#include "facegame/core/action_unit.hpp"
#include "facegame/error.hpp"

namespace facegame::explain {

/// Jaccard index |P n T| / |P u T| of the player and target AU sets.
/// Throws EmptyUniverse when both sets are empty.
inline double score(AUSet player, AUSet target)
{
    const auto uni = (player | target).size();
    if (uni == 0) throw EmptyUniverse("score of two empty AU sets is undefined");
    return static_cast<double>((player & target).size()) / static_cast<double>(uni);
}

struct AuDiff
{
    AUSet correct;  // P n T
    AUSet spurious; // P - T, to be removed
    AUSet missing;  // T - P, to be added

    friend bool operator==(const AuDiff&, const AuDiff&) = default;
};

inline AuDiff diff(AUSet player, AUSet target) { return {player & target, player - target, target - player}; }

} // namespace facegame::explain
