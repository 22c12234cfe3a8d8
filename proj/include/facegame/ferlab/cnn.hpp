#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/core/emotion.hpp"
#include "facegame/core/image.hpp"
#include "facegame/ferlab/layers.hpp"

namespace facegame::ferlab {

inline constexpr std::size_t kConvLayers = 4;
inline constexpr std::size_t kOutputs = kEmotionCount;

struct CnnConfig
{
    std::size_t input_size = 48;
    std::array<std::size_t, kConvLayers> filters{32, 32, 64, 64};
    std::size_t hidden = 96;

    /// Side length after the three pools.
    std::size_t final_side() const { return input_size / 8; }
    std::size_t flatten_size() const { return final_side() * final_side() * filters.back(); }

    friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

/// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout
{
    struct Block
    {
        std::size_t w = 0, w_size = 0, b = 0, b_size = 0;
    };
    std::array<Block, kConvLayers> conv{};
    Block fc1, fc2;
    std::size_t total = 0;

    static ParamLayout of(const CnnConfig& cfg)
    {
        ParamLayout l;
        std::size_t at = 0;
        auto place = [&](Block& blk, std::size_t w_size, std::size_t b_size) {
            blk = {at, w_size, at + w_size, b_size};
            at += w_size + b_size;
        };
        std::size_t in_c = 1;
        for (std::size_t i = 0; i < kConvLayers; ++i) {
            place(l.conv[i], cfg.filters[i] * in_c * 9, cfg.filters[i]);
            in_c = cfg.filters[i];
        }
        place(l.fc1, cfg.hidden * cfg.flatten_size(), cfg.hidden);
        place(l.fc2, kOutputs * cfg.hidden, kOutputs);
        l.total = at;
        return l;
    }
};

// conv(32) -> ReLU -> pool, conv(32) -> ReLU -> pool, conv(64) -> ReLU -> pool,
// conv(64) -> ReLU -> flatten, dense(96) -> ReLU, dense(6) -> sigmoid.
struct CnnModel
{
    CnnConfig config;
    ParamLayout layout;
    std::vector<double> params;

    std::span<double> w(const ParamLayout::Block& b) { return {params.data() + b.w, b.w_size}; }
    std::span<double> bias(const ParamLayout::Block& b) { return {params.data() + b.b, b.b_size}; }
    std::span<const double> w(const ParamLayout::Block& b) const { return {params.data() + b.w, b.w_size}; }
    std::span<const double> bias(const ParamLayout::Block& b) const { return {params.data() + b.b, b.b_size}; }

    friend bool operator==(const CnnModel& a, const CnnModel& b)
    {
        return a.config == b.config && a.params == b.params;
    }
};

inline void validate_config(const CnnConfig& cfg)
{
    if (cfg.input_size < 8 || cfg.input_size % 8 != 0) {
        throw BadInputSize("input size " + std::to_string(cfg.input_size) + " is not a positive multiple of 8");
    }
    for (auto f : cfg.filters) {
        if (f == 0) throw BadInputSize("filter count must be positive");
    }
    if (cfg.hidden == 0) throw BadInputSize("hidden layer must be non-empty");
}

namespace detail {

// 53-bit uniform in [0, 1) from the raw engine output, so initial weights do
// not depend on the standard library's distribution implementation.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void he_uniform(std::span<double> w, std::size_t fan_in, std::mt19937_64& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w) v = (2.0 * unit_uniform(rng) - 1.0) * limit;
}

} // namespace detail

/// He-uniform weights, zero biases.
inline CnnModel build_model(const CnnConfig& cfg, std::uint64_t seed)
{
    validate_config(cfg);
    CnnModel m{cfg, ParamLayout::of(cfg), {}};
    m.params.assign(m.layout.total, 0.0);
    std::mt19937_64 rng(seed);
    std::size_t in_c = 1;
    for (std::size_t i = 0; i < kConvLayers; ++i) {
        detail::he_uniform(m.w(m.layout.conv[i]), in_c * 9, rng);
        in_c = cfg.filters[i];
    }
    detail::he_uniform(m.w(m.layout.fc1), cfg.flatten_size(), rng);
    detail::he_uniform(m.w(m.layout.fc2), cfg.hidden, rng);
    return m;
}

inline CnnModel build_model(std::size_t input_size, std::uint64_t seed)
{
    CnnConfig cfg;
    cfg.input_size = input_size;
    return build_model(cfg, seed);
}

/// Activations kept for the backward pass.
struct Activations
{
    std::size_t batch = 0;
    std::array<Shape, kConvLayers> conv_in{}; // input shape of each conv layer
    std::array<std::vector<double>, kConvLayers> conv_in_data;
    std::array<std::vector<double>, kConvLayers> conv_out; // post-ReLU
    std::array<std::vector<std::uint32_t>, kConvLayers - 1> pool_idx;
    std::vector<double> hidden; // post-ReLU
    std::vector<double> logits;
    std::vector<double> probs;
};

/// Packs images into an (n, 1, s, s) tensor.
inline std::vector<double> to_tensor(std::span<const GrayImage> images, std::size_t side)
{
    std::vector<double> x;
    x.reserve(images.size() * side * side);
    for (const auto& img : images) {
        if (static_cast<std::size_t>(img.width()) != side || static_cast<std::size_t>(img.height()) != side) {
            throw ShapeMismatch("image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                                ", model expects " + std::to_string(side) + "x" + std::to_string(side));
        }
        x.insert(x.end(), img.pixels().begin(), img.pixels().end());
    }
    return x;
}

/// Runs the network on an (n, 1, s, s) tensor; fills `act` for backward.
inline void forward_tensor(const CnnModel& m, std::span<const double> x, std::size_t n, Activations& act)
{
    const auto& cfg = m.config;
    const std::size_t s = cfg.input_size;
    if (x.size() != n * s * s) {
        throw ShapeMismatch("input tensor has " + std::to_string(x.size()) + " values, expected " +
                            std::to_string(n * s * s));
    }
    act.batch = n;
    Shape shape{n, 1, s, s};
    act.conv_in_data[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        act.conv_in[l] = shape;
        const std::size_t oc = cfg.filters[l];
        Shape out{n, oc, shape.h, shape.w};
        auto& y = act.conv_out[l];
        y.assign(out.size(), 0.0);
        conv3x3_forward(act.conv_in_data[l], shape, m.w(m.layout.conv[l]), m.bias(m.layout.conv[l]), oc, y);
        relu_inplace(y);
        if (l + 1 < kConvLayers) {
            Shape pooled{n, oc, out.h / 2, out.w / 2};
            auto& next = act.conv_in_data[l + 1];
            next.assign(pooled.size(), 0.0);
            act.pool_idx[l].assign(pooled.size(), 0);
            maxpool2_forward(y, out, next, act.pool_idx[l]);
            shape = pooled;
        }
    }
    const std::size_t flat = cfg.flatten_size();
    act.hidden.assign(n * cfg.hidden, 0.0);
    dense_forward(act.conv_out.back(), n, flat, m.w(m.layout.fc1), m.bias(m.layout.fc1), cfg.hidden, act.hidden);
    relu_inplace(act.hidden);
    act.logits.assign(n * kOutputs, 0.0);
    dense_forward(act.hidden, n, cfg.hidden, m.w(m.layout.fc2), m.bias(m.layout.fc2), kOutputs, act.logits);
    act.probs.resize(act.logits.size());
    for (std::size_t i = 0; i < act.logits.size(); ++i) act.probs[i] = stable_sigmoid(act.logits[i]);
}

/// n x 6 sigmoid outputs, row-major.
inline std::vector<double> forward(const CnnModel& m, std::span<const GrayImage> batch)
{
    Activations act;
    const auto x = to_tensor(batch, m.config.input_size);
    forward_tensor(m, x, batch.size(), act);
    return act.probs;
}

inline std::vector<double> one_hot(std::span<const Emotion> labels)
{
    std::vector<double> t(labels.size() * kOutputs, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) t[i * kOutputs + static_cast<std::size_t>(labels[i])] = 1.0;
    return t;
}

struct LossAndGradient
{
    double loss = 0.0;
    std::vector<double> gradient; // same layout as CnnModel::params
};

/// Mean binary cross-entropy over the n x 6 outputs and its exact gradient.
/// `act` must come from forward_tensor on the same model and batch.
inline LossAndGradient backward_from(const CnnModel& m, Activations& act, std::span<const double> targets)
{
    const auto& cfg = m.config;
    const auto& L = m.layout;
    const std::size_t n = act.batch;
    if (targets.size() != n * kOutputs) {
        throw ShapeMismatch("targets have " + std::to_string(targets.size()) + " values, expected " +
                            std::to_string(n * kOutputs));
    }
    LossAndGradient out;
    out.gradient.assign(L.total, 0.0);
    auto g = [&](std::size_t at, std::size_t size) { return std::span<double>(out.gradient.data() + at, size); };

    std::vector<double> dlogits(n * kOutputs);
    out.loss = sigmoid_bce(act.logits, targets, {}, dlogits);

    std::vector<double> dhidden(n * cfg.hidden, 0.0);
    dense_backward(act.hidden, n, cfg.hidden, m.w(L.fc2), kOutputs, dlogits, dhidden, g(L.fc2.w, L.fc2.w_size),
                   g(L.fc2.b, L.fc2.b_size));
    relu_backward_inplace(act.hidden, dhidden);

    const std::size_t flat = cfg.flatten_size();
    std::vector<double> dconv(n * flat, 0.0);
    dense_backward(act.conv_out.back(), n, flat, m.w(L.fc1), cfg.hidden, dhidden, dconv, g(L.fc1.w, L.fc1.w_size),
                   g(L.fc1.b, L.fc1.b_size));

    for (std::size_t l = kConvLayers; l-- > 0;) {
        relu_backward_inplace(act.conv_out[l], dconv);
        const Shape in = act.conv_in[l];
        std::vector<double> dinput;
        if (l > 0) dinput.assign(in.size(), 0.0);
        conv3x3_backward(act.conv_in_data[l], in, m.w(L.conv[l]), cfg.filters[l], dconv, dinput,
                         g(L.conv[l].w, L.conv[l].w_size), g(L.conv[l].b, L.conv[l].b_size));
        if (l == 0) break;
        // dinput is the gradient w.r.t. the pooled output of layer l-1
        const Shape before{n, in.c, in.h * 2, in.w * 2};
        dconv.assign(before.size(), 0.0);
        maxpool2_backward(dinput, act.pool_idx[l - 1], dconv);
    }
    return out;
}

inline LossAndGradient backward(const CnnModel& m, std::span<const GrayImage> batch, std::span<const Emotion> labels)
{
    if (batch.size() != labels.size()) throw ShapeMismatch("batch and label counts differ");
    Activations act;
    const auto x = to_tensor(batch, m.config.input_size);
    forward_tensor(m, x, batch.size(), act);
    const auto t = one_hot(labels);
    return backward_from(m, act, t);
}

/// Index of the largest output per row.
inline std::vector<Emotion> predict(const CnnModel& m, std::span<const GrayImage> images, std::size_t chunk = 64)
{
    std::vector<Emotion> out;
    out.reserve(images.size());
    Activations act;
    for (std::size_t at = 0; at < images.size(); at += chunk) {
        const auto part = images.subspan(at, std::min(chunk, images.size() - at));
        const auto x = to_tensor(part, m.config.input_size);
        forward_tensor(m, x, part.size(), act);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double* row = act.probs.data() + i * kOutputs;
            out.push_back(static_cast<Emotion>(std::max_element(row, row + kOutputs) - row));
        }
    }
    return out;
}

inline double accuracy(const CnnModel& m, std::span<const GrayImage> images, std::span<const Emotion> labels)
{
    if (images.size() != labels.size()) throw ShapeMismatch("image and label counts differ");
    if (images.empty()) return 0.0;
    const auto pred = predict(m, images);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(images.size());
}

// ---- training --------------------------------------------------------------------

struct TrainOptions
{
    int epochs = 20;
    double lr = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    bool stop_at_perfect = false; // end early once the whole training set is classified correctly
};

struct EpochStats
{
    double loss = 0.0;     // mean batch loss weighted by batch size
    double accuracy = 0.0; // on the training set after the epoch
};

struct TrainHistory
{
    std::vector<EpochStats> epochs;
};

/// Seeded permutation of 0..n-1 (Fisher-Yates on raw engine output).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    return idx;
}

inline void sgd_step(CnnModel& m, std::span<const double> gradient, double lr)
{
    for (std::size_t i = 0; i < m.params.size(); ++i) m.params[i] -= lr * gradient[i];
}

/// Mini-batch SGD on mean BCE. Deterministic for a given seed.
inline TrainHistory train_cnn(CnnModel& m, std::span<const GrayImage> images, std::span<const Emotion> labels,
                              const TrainOptions& opt)
{
    if (images.size() != labels.size()) throw ShapeMismatch("image and label counts differ");
    if (images.empty()) throw ShapeMismatch("empty training set");
    const std::size_t side = m.config.input_size;
    const std::size_t bs = std::max<std::size_t>(1, opt.batch_size);
    const auto all = to_tensor(images, side);
    const auto targets = one_hot(labels);
    std::mt19937_64 rng(opt.seed);
    TrainHistory history;
    Activations act;
    std::vector<double> x, t;
    for (int e = 0; e < opt.epochs; ++e) {
        const auto order = shuffled_indices(images.size(), rng);
        double loss_sum = 0.0;
        for (std::size_t at = 0; at < order.size(); at += bs) {
            const std::size_t n = std::min(bs, order.size() - at);
            x.clear();
            t.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t k = order[at + i];
                x.insert(x.end(), all.begin() + k * side * side, all.begin() + (k + 1) * side * side);
                t.insert(t.end(), targets.begin() + k * kOutputs, targets.begin() + (k + 1) * kOutputs);
            }
            forward_tensor(m, x, n, act);
            const auto lg = backward_from(m, act, t);
            sgd_step(m, lg.gradient, opt.lr);
            loss_sum += lg.loss * static_cast<double>(n);
        }
        EpochStats st;
        st.loss = loss_sum / static_cast<double>(images.size());
        st.accuracy = accuracy(m, images, labels);
        history.epochs.push_back(st);
        if (opt.stop_at_perfect && st.accuracy == 1.0) break;
    }
    return history;
}

// ---- persistence ---------------------------------------------------------------------

inline constexpr const char* kCnnFormat = "facegame-cnn";

inline void save_cnn(const CnnModel& m, const std::filesystem::path& path)
{
    nlohmann::json j;
    j["format"] = kCnnFormat;
    j["version"] = 1;
    j["input_size"] = m.config.input_size;
    j["filters"] = m.config.filters;
    j["hidden"] = m.config.hidden;
    j["params"] = m.params;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw BadModelFile("cannot write " + path.string());
    out << j.dump();
    if (!out) throw BadModelFile("write failed for " + path.string());
}

inline CnnModel load_cnn(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw BadModelFile("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format") != kCnnFormat) throw BadModelFile(path.string() + " is not a CNN model file");
        CnnConfig cfg;
        cfg.input_size = j.at("input_size").get<std::size_t>();
        cfg.filters = j.at("filters").get<std::array<std::size_t, kConvLayers>>();
        cfg.hidden = j.at("hidden").get<std::size_t>();
        validate_config(cfg);
        CnnModel m{cfg, ParamLayout::of(cfg), j.at("params").get<std::vector<double>>()};
        if (m.params.size() != m.layout.total) {
            throw BadModelFile("parameter count " + std::to_string(m.params.size()) + " does not match the layout (" +
                               std::to_string(m.layout.total) + ")");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw BadModelFile(path.string() + ": " + e.what());
    }
}

} // namespace facegame::ferlab
