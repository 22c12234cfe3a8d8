#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "facegame/ferlab/cnn.hpp"
#include "facegame/ferlab/data.hpp"

namespace facegame::ferlab {

struct ExperimentOptions
{
    std::size_t k = 5;
    std::vector<std::uint64_t> seeds; // empty: 1..k
    std::size_t n_train = 200;        // per class
    std::size_t n_test = 50;          // per class
    CnnConfig cnn;
    TrainOptions train;   // train.seed is replaced by the sample seed
    std::size_t threads = 1; // repetitions run concurrently when > 1
};

struct ExperimentRow
{
    std::size_t sample = 0; // 1-based
    std::uint64_t seed = 0;
    double acc_without = 0.0;
    double acc_with = 0.0;
};

struct EnrichmentReport
{
    std::string base_name;
    std::string extra_name;
    std::size_t extra_size = 0;
    std::size_t n_train = 0, n_test = 0;
    std::vector<ExperimentRow> rows;

    double mean_without() const
    {
        double s = 0.0;
        for (const auto& r : rows) s += r.acc_without;
        return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
    }

    double mean_with() const
    {
        double s = 0.0;
        for (const auto& r : rows) s += r.acc_with;
        return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
    }
};

inline std::vector<std::uint64_t> experiment_seeds(const ExperimentOptions& opt)
{
    if (opt.seeds.empty()) {
        std::vector<std::uint64_t> s(opt.k);
        for (std::size_t i = 0; i < opt.k; ++i) s[i] = i + 1;
        return s;
    }
    if (opt.seeds.size() != opt.k) {
        throw BadRequest(std::to_string(opt.seeds.size()) + " seeds given for k = " + std::to_string(opt.k));
    }
    return opt.seeds;
}

/// One repetition: both models start from the same weights and see the same
/// sample; the second one also trains on `extra`. Test data is the sample's
/// held-out split of `base` only.
inline ExperimentRow run_repetition(const LabeledImageSet& base, const LabeledImageSet& extra,
                                    const ExperimentOptions& opt, std::size_t sample, std::uint64_t seed)
{
    const auto pair = balanced_sample(base, opt.n_train, opt.n_test, seed);
    TrainOptions to = opt.train;
    to.seed = seed;

    ExperimentRow row{sample, seed, 0.0, 0.0};
    {
        auto m = build_model(opt.cnn, seed);
        train_cnn(m, pair.train.images(), pair.train.labels(), to);
        row.acc_without = accuracy(m, pair.test.images(), pair.test.labels());
    }
    {
        LabeledImageSet enriched = pair.train;
        enriched.append(extra);
        auto m = build_model(opt.cnn, seed);
        train_cnn(m, enriched.images(), enriched.labels(), to);
        row.acc_with = accuracy(m, pair.test.images(), pair.test.labels());
    }
    return row;
}

inline EnrichmentReport run_enrichment_experiment(const LabeledImageSet& base, const LabeledImageSet& extra,
                                                  const ExperimentOptions& opt = {})
{
    const auto seeds = experiment_seeds(opt);
    validate_config(opt.cnn);
    // fail before any training if the base set cannot be sampled
    (void)balanced_sample(base, opt.n_train, opt.n_test, seeds.empty() ? 1 : seeds.front());

    EnrichmentReport rep{base.name(), extra.name(), extra.size(), opt.n_train, opt.n_test, {}};
    rep.rows.resize(seeds.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(opt.threads, seeds.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) rep.rows[i] = run_repetition(base, extra, opt, i + 1, seeds[i]);
        return rep;
    }
    std::vector<std::exception_ptr> errors(seeds.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < seeds.size(); i += workers) {
                    try {
                        rep.rows[i] = run_repetition(base, extra, opt, i + 1, seeds[i]);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return rep;
}

/// Plain-text table. Columns: sample (1-based), seed, acc_without, acc_with
/// (test accuracy as a fraction); a final "mean" row averages both columns.
inline std::string format_enrichment_report(const EnrichmentReport& r)
{
    auto line = [](const char* f, auto... args) {
        char buf[256];
        std::snprintf(buf, sizeof buf, f, args...);
        return std::string(buf);
    };
    std::string out;
    out += "# base: " + r.base_name + line(" (%zu train / %zu test per class)\n", r.n_train, r.n_test);
    out += "# extra: " + r.extra_name + line(" (%zu images, training only)\n", r.extra_size);
    out += line("%-8s %-20s %-12s %-12s\n", "sample", "seed", "acc_without", "acc_with");
    for (const auto& row : r.rows) {
        out += line("%-8zu %-20llu %-12.4f %-12.4f\n", row.sample, static_cast<unsigned long long>(row.seed),
                    row.acc_without, row.acc_with);
    }
    out += line("%-8s %-20s %-12.4f %-12.4f\n", "mean", "", r.mean_without(), r.mean_with());
    return out;
}

} // namespace facegame::ferlab
