#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "facegame/au/model.hpp"

namespace facegame::au {

struct AuTrainingExample
{
    features::FeatureVector features;
    AUSet labels;
};

using AuTrainingSet = std::vector<AuTrainingExample>;

struct AuTrainOptions
{
    double l2 = 1e-3;
    double lr = 0.1;
    int epochs = 200;
    std::uint64_t seed = 0;
    unsigned threads = 0; // 0: hardware concurrency
};

struct AuTrainResult
{
    AuModel model;
    std::array<std::vector<double>, kAuCount> loss_history; // loss before each epoch's step
    std::array<double, kAuCount> final_loss{};
};

// Row-major design matrix restricted to the features with non-zero variance.
struct StandardizedData
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::size_t> active; // original feature index of each column

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct HeadObjective
{
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

/// Mean binary cross-entropy plus (l2 / 2) * |w|^2 and its exact gradient.
/// The bias is not regularized.
inline HeadObjective head_objective(const StandardizedData& x, std::span<const double> y,
                                    std::span<const double> w, double b, double l2)
{
    HeadObjective out;
    out.grad_w.assign(x.cols, 0.0);
    const double inv_n = 1.0 / static_cast<double>(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto xr = x.row(r);
        double z = b;
        for (std::size_t c = 0; c < x.cols; ++c) z += w[c] * xr[c];
        out.loss += (softplus(z) - y[r] * z) * inv_n;
        const double residual = (sigmoid(z) - y[r]) * inv_n;
        out.grad_b += residual;
        for (std::size_t c = 0; c < x.cols; ++c) out.grad_w[c] += residual * xr[c];
    }
    double sq = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) {
        sq += w[c] * w[c];
        out.grad_w[c] += l2 * w[c];
    }
    out.loss += 0.5 * l2 * sq;
    return out;
}

struct Standardizer
{
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<std::size_t> active;
};

/// Population mean/stdev per feature. Zero-variance features get stdev 1 and are
/// left out of `active`.
inline Standardizer fit_standardizer(const AuTrainingSet& data)
{
    const std::size_t d = data.front().features.size();
    const double n = static_cast<double>(data.size());
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.stdev.assign(d, 1.0);
    for (const auto& ex : data) {
        for (std::size_t i = 0; i < d; ++i) s.mean[i] += ex.features[i];
    }
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (const auto& ex : data) {
        for (std::size_t i = 0; i < d; ++i) {
            const double dv = ex.features[i] - s.mean[i];
            var[i] += dv * dv;
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double sd = std::sqrt(var[i] / n);
        // Relative guard: rounding noise on a constant column is not variance.
        if (sd > 1e-12 * std::max(1.0, std::abs(s.mean[i]))) {
            s.stdev[i] = sd;
            s.active.push_back(i);
        }
    }
    return s;
}

inline StandardizedData standardize(const AuTrainingSet& data, const Standardizer& s)
{
    StandardizedData x;
    x.rows = data.size();
    x.cols = s.active.size();
    x.active = s.active;
    x.values.resize(x.rows * x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) {
            const std::size_t i = s.active[c];
            x.values[r * x.cols + c] = (data[r].features[i] - s.mean[i]) / s.stdev[i];
        }
    }
    return x;
}

/// Full-batch gradient descent on each AU head independently.
/// Throws DegenerateData when the set is empty, ragged, or an AU lacks a class.
inline AuTrainResult train(const AuTrainingSet& data, const AuTrainOptions& opt = {})
{
    if (data.empty()) throw DegenerateData("empty training set");
    const std::size_t d = data.front().features.size();
    for (const auto& ex : data) {
        if (ex.features.size() != d) throw DegenerateData("feature vectors differ in length");
    }
    for (std::size_t k = 0; k < kAuCount; ++k) {
        const auto au = ActionUnit::from_index(k);
        const auto positives = std::count_if(data.begin(), data.end(), [&](const auto& ex) { return ex.labels.contains(au); });
        if (positives == 0 || positives == static_cast<std::ptrdiff_t>(data.size())) {
            throw DegenerateData(au.label() + " needs at least one positive and one negative example");
        }
    }
    if (!(opt.lr > 0.0) || opt.l2 < 0.0 || opt.epochs < 0) throw DegenerateData("invalid optimizer settings");

    const auto s = fit_standardizer(data);
    const auto x = standardize(data, s);

    AuTrainResult result;
    result.model.feature_mean = s.mean;
    result.model.feature_std = s.stdev;

    // Initial weights are drawn up front so the result does not depend on thread count.
    std::array<std::vector<double>, kAuCount> init;
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& w : init) {
        w.resize(x.cols);
        for (auto& v : w) v = noise(rng);
    }

    auto train_head = [&](std::size_t k) {
        const auto au = ActionUnit::from_index(k);
        std::vector<double> y(x.rows);
        for (std::size_t r = 0; r < x.rows; ++r) y[r] = data[r].labels.contains(au) ? 1.0 : 0.0;

        std::vector<double> w = init[k];
        double b = 0.0;
        auto& history = result.loss_history[k];
        history.reserve(static_cast<std::size_t>(opt.epochs));
        for (int e = 0; e < opt.epochs; ++e) {
            const auto obj = head_objective(x, y, w, b, opt.l2);
            history.push_back(obj.loss);
            for (std::size_t c = 0; c < x.cols; ++c) w[c] -= opt.lr * obj.grad_w[c];
            b -= opt.lr * obj.grad_b;
        }
        result.final_loss[k] = head_objective(x, y, w, b, opt.l2).loss;

        auto& head = result.model.heads[k];
        head.weights.assign(d, 0.0);
        for (std::size_t c = 0; c < x.cols; ++c) head.weights[x.active[c]] = w[c];
        head.bias = b;
    };

    unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, kAuCount);
    if (threads <= 1) {
        for (std::size_t k = 0; k < kAuCount; ++k) train_head(k);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t k = t; k < kAuCount; k += threads) train_head(k);
            });
        }
    }
    return result;
}

} // namespace facegame::au
