#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "facegame/core/action_unit.hpp"
#include "facegame/error.hpp"
#include "facegame/features/pipeline.hpp"

namespace facegame::au {

inline constexpr int kModelFormatVersion = 1;

inline double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct AuHead
{
    std::vector<double> weights;
    double bias = 0.0;
    double threshold = 0.5; // inclusive: AU present iff p >= threshold

    friend bool operator==(const AuHead&, const AuHead&) = default;
};

// Twenty independent logistic regressions over standardized features, one per
// catalog AU, indexed by the AU's catalog position.
struct AuModel
{
    int version = kModelFormatVersion;
    std::vector<double> feature_mean;
    std::vector<double> feature_std; // > 0; constant features carry 1 and a zero weight
    std::array<AuHead, kAuCount> heads;

    std::size_t feature_size() const noexcept { return feature_mean.size(); }

    AuHead& head(ActionUnit au) { return heads[au.index()]; }
    const AuHead& head(ActionUnit au) const { return heads[au.index()]; }

    /// Zero weights, unit scale, threshold 0.5.
    static AuModel zeros(std::size_t feature_size)
    {
        AuModel m;
        m.feature_mean.assign(feature_size, 0.0);
        m.feature_std.assign(feature_size, 1.0);
        for (auto& h : m.heads) h.weights.assign(feature_size, 0.0);
        return m;
    }

    friend bool operator==(const AuModel&, const AuModel&) = default;
};

/// Throws DimensionMismatch unless every head and the standardizer match the feature length.
inline void check_dimensions(const AuModel& m, std::size_t feature_size)
{
    if (m.feature_mean.size() != feature_size || m.feature_std.size() != feature_size) {
        throw DimensionMismatch("model expects " + std::to_string(m.feature_mean.size()) + " features, got " +
                                std::to_string(feature_size));
    }
    for (const auto& h : m.heads) {
        if (h.weights.size() != feature_size) throw DimensionMismatch("head weight length differs from features");
    }
}

inline std::array<double, kAuCount> predict_probabilities(const AuModel& m, std::span<const double> f)
{
    check_dimensions(m, f.size());
    std::vector<double> z(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) z[i] = (f[i] - m.feature_mean[i]) / m.feature_std[i];

    std::array<double, kAuCount> out{};
    for (std::size_t k = 0; k < kAuCount; ++k) {
        const auto& h = m.heads[k];
        double acc = h.bias;
        for (std::size_t i = 0; i < z.size(); ++i) acc += h.weights[i] * z[i];
        out[k] = sigmoid(acc);
    }
    return out;
}

inline AUSet detect_aus(const AuModel& m, std::span<const double> f)
{
    const auto p = predict_probabilities(m, f);
    AUSet set;
    for (std::size_t k = 0; k < kAuCount; ++k) {
        if (p[k] >= m.heads[k].threshold) set.insert(ActionUnit::from_index(k));
    }
    return set;
}

} // namespace facegame::au
