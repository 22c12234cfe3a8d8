#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facegame/error.hpp"

namespace facegame {

struct AuCatalogEntry
{
    int code;
    std::string_view name;
};

// The 20 Action Units the detector predicts, ascending by code. The position in
// this table is the AU's dense index (used by AUSet bitmasks, model heads and
// co-occurrence columns).
inline constexpr std::array<AuCatalogEntry, 20> kAuCatalog{{
    {1, "Inner Brow Raiser"},
    {2, "Outer Brow Raiser"},
    {4, "Brow Lowerer"},
    {5, "Upper Lid Raiser"},
    {6, "Cheek Raiser"},
    {7, "Lid Tightener"},
    {9, "Nose Wrinkler"},
    {10, "Upper Lip Raiser"},
    {11, "Nasolabial Deepener"},
    {12, "Lip Corner Puller"},
    {14, "Dimpler"},
    {15, "Lip Corner Depressor"},
    {17, "Chin Raiser"},
    {20, "Lip Stretcher"},
    {23, "Lip Tightener"},
    {24, "Lip Pressor"},
    {25, "Lips Part"},
    {26, "Jaw Drop"},
    {28, "Lip Suck"},
    {43, "Eyes Closed"},
}};

inline constexpr std::size_t kAuCount = kAuCatalog.size();

/// Dense catalog index of `code`, or -1 when the code is not one of the 20.
constexpr int au_index_of(int code) noexcept
{
    for (std::size_t i = 0; i < kAuCatalog.size(); ++i) {
        if (kAuCatalog[i].code == code) return static_cast<int>(i);
    }
    return -1;
}

class ActionUnit
{
public:
    /// Throws UnknownAuCode for any code outside the catalog.
    explicit constexpr ActionUnit(int code) : index_(checked_index(code)) {}

    static constexpr ActionUnit from_index(std::size_t index)
    {
        if (index >= kAuCount) throw UnknownAuCode("index " + std::to_string(index));
        return ActionUnit(kAuCatalog[index].code);
    }

    constexpr int code() const noexcept { return kAuCatalog[index_].code; }
    constexpr std::size_t index() const noexcept { return index_; }
    constexpr std::string_view name() const noexcept { return kAuCatalog[index_].name; }

    std::string label() const { return "AU" + std::to_string(code()); }

    friend constexpr bool operator==(ActionUnit, ActionUnit) = default;
    friend constexpr auto operator<=>(ActionUnit a, ActionUnit b) { return a.index_ <=> b.index_; }

private:
    static constexpr std::size_t checked_index(int code)
    {
        const int i = au_index_of(code);
        if (i < 0) throw UnknownAuCode("code " + std::to_string(code) + " is not in the AU catalog");
        return static_cast<std::size_t>(i);
    }

    std::size_t index_;
};

// Unordered set of Action Units stored as a 20-bit mask over catalog indices.
// Iteration is always in ascending AU code.
class AUSet
{
public:
    using Mask = std::uint32_t;
    static constexpr Mask kFullMask = (Mask{1} << kAuCount) - 1;

    constexpr AUSet() = default;
    constexpr AUSet(std::initializer_list<ActionUnit> aus)
    {
        for (auto au : aus) insert(au);
    }

    static constexpr AUSet from_mask(Mask mask) { return AUSet(mask & kFullMask, 0); }
    static constexpr AUSet all() { return from_mask(kFullMask); }

    constexpr Mask mask() const noexcept { return mask_; }
    constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }
    constexpr bool empty() const noexcept { return mask_ == 0; }
    constexpr bool contains(ActionUnit au) const noexcept { return (mask_ >> au.index()) & 1u; }

    constexpr void insert(ActionUnit au) noexcept { mask_ |= Mask{1} << au.index(); }
    constexpr void erase(ActionUnit au) noexcept { mask_ &= ~(Mask{1} << au.index()); }

    std::vector<ActionUnit> members() const
    {
        std::vector<ActionUnit> out;
        out.reserve(size());
        for (std::size_t i = 0; i < kAuCount; ++i) {
            if ((mask_ >> i) & 1u) out.push_back(ActionUnit::from_index(i));
        }
        return out;
    }

    std::vector<int> codes() const
    {
        std::vector<int> out;
        for (auto au : members()) out.push_back(au.code());
        return out;
    }

    friend constexpr AUSet operator|(AUSet a, AUSet b) { return from_mask(a.mask_ | b.mask_); }
    friend constexpr AUSet operator&(AUSet a, AUSet b) { return from_mask(a.mask_ & b.mask_); }
    friend constexpr AUSet operator-(AUSet a, AUSet b) { return from_mask(a.mask_ & ~b.mask_); }
    friend constexpr AUSet operator^(AUSet a, AUSet b) { return from_mask(a.mask_ ^ b.mask_); }
    friend constexpr bool operator==(AUSet, AUSet) = default;

    constexpr bool is_subset_of(AUSet other) const noexcept { return (mask_ & ~other.mask_) == 0; }

private:
    constexpr AUSet(Mask mask, int) : mask_(mask) {}

    Mask mask_ = 0;
};

/// Builds a set from raw integer codes; duplicates collapse. Throws UnknownAuCode.
inline AUSet au_set_from_codes(std::span<const int> codes)
{
    AUSet set;
    for (int c : codes) set.insert(ActionUnit(c));
    return set;
}

inline AUSet au_set_from_codes(std::initializer_list<int> codes)
{
    return au_set_from_codes(std::span<const int>(codes.begin(), codes.size()));
}

inline std::string to_string(AUSet set)
{
    std::string out = "{";
    bool first = true;
    for (auto au : set.members()) {
        if (!first) out += ",";
        out += au.label();
        first = false;
    }
    return out + "}";
}

} // namespace facegame
