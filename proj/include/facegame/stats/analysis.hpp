#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facegame/core/records.hpp"
#include "facegame/stats/ttest.hpp"

namespace facegame::stats {

inline constexpr int kGameAttempts = 5;

// One round of one session. `scores` holds every attempt in attempt order;
// only rounds with attempts 1..5 all present become trajectories.
struct GameTrajectory
{
    std::string session_id;
    std::string round_id;
    Group group = Group::control;
    Emotion emotion = Emotion::anger;
    std::vector<double> scores;

    double s1() const { return scores.front(); }
    double last() const { return scores.back(); }

    /// Mean of S2..S5.
    double m_rest() const
    {
        double s = 0.0;
        for (int i = 1; i < kGameAttempts; ++i) s += scores[static_cast<std::size_t>(i)];
        return s / (kGameAttempts - 1);
    }

    bool improved() const { return last() > s1(); }
};

struct TrajectorySet
{
    std::vector<GameTrajectory> games;
    std::size_t skipped = 0; // rounds lacking one of attempts 1..5
};

/// Groups records by (session, round) in order of first appearance.
inline TrajectorySet trajectories(const std::vector<RoundRecord>& records)
{
    struct Pending
    {
        const RoundRecord* first;
        std::map<int, double> by_attempt;
    };
    std::vector<Pending> rounds;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& r : records) {
        auto [it, fresh] = index.try_emplace({r.session_id, r.round_id}, rounds.size());
        if (fresh) rounds.push_back({&r, {}});
        rounds[it->second].by_attempt.try_emplace(r.attempt_index, r.score);
    }
    TrajectorySet out;
    for (const auto& p : rounds) {
        bool complete = true;
        for (int k = 1; k <= kGameAttempts; ++k) complete = complete && p.by_attempt.count(k);
        if (!complete) {
            ++out.skipped;
            continue;
        }
        GameTrajectory g{p.first->session_id, p.first->round_id, p.first->group, p.first->emotion, {}};
        for (const auto& [k, s] : p.by_attempt) {
            if (k >= 1) g.scores.push_back(s);
        }
        out.games.push_back(std::move(g));
    }
    return out;
}

struct Rate
{
    std::size_t improved = 0;
    std::size_t games = 0;
    double fraction() const { return games ? static_cast<double>(improved) / static_cast<double>(games) : 0.0; }
};

struct ImprovementRates
{
    Rate overall;
    std::optional<Rate> control;
    std::optional<Rate> treatment;
};

/// Share of games whose last score is strictly above the first.
inline ImprovementRates improvement_rate(const std::vector<GameTrajectory>& games)
{
    if (games.empty()) throw EmptyInput("no complete games");
    ImprovementRates r;
    for (const auto& g : games) {
        auto& group = g.group == Group::control ? r.control : r.treatment;
        if (!group) group = Rate{};
        ++r.overall.games;
        ++group->games;
        if (g.improved()) {
            ++r.overall.improved;
            ++group->improved;
        }
    }
    return r;
}

struct SectionResult
{
    std::string name;
    std::size_t games = 0;
    std::optional<TTestResult> test; // S1 (a) against M_rest (b)
    std::string test_note;           // why `test` is absent, if it is
    Rate improvement;
};

struct Analysis
{
    std::size_t records = 0;
    std::size_t skipped = 0;
    std::array<SectionResult, 3> sections; // all, control, treatment
};

inline SectionResult analyse_section(std::string name, const std::vector<const GameTrajectory*>& games)
{
    SectionResult s;
    s.name = std::move(name);
    s.games = games.size();
    std::vector<double> first, rest;
    for (const auto* g : games) {
        first.push_back(g->s1());
        rest.push_back(g->m_rest());
        ++s.improvement.games;
        s.improvement.improved += g->improved();
    }
    if (games.empty()) {
        s.test_note = "absent (no complete games)";
        return s;
    }
    try {
        s.test = paired_t_test(first, rest);
    } catch (const Error& e) {
        s.test_note = e.what();
    }
    return s;
}

inline Analysis analyse(const std::vector<RoundRecord>& records)
{
    Analysis a;
    a.records = records.size();
    const auto set = trajectories(records);
    a.skipped = set.skipped;
    std::vector<const GameTrajectory*> all, control, treatment;
    for (const auto& g : set.games) {
        all.push_back(&g);
        (g.group == Group::control ? control : treatment).push_back(&g);
    }
    a.sections = {analyse_section("all games", all), analyse_section("control", control),
                  analyse_section("treatment", treatment)};
    return a;
}

namespace detail {

inline std::string fmt(const char* f, auto... args)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

inline std::string format_p(double p) { return p >= 1e-4 ? fmt("p = %.4f", p) : fmt("p = %.2e", p); }

} // namespace detail

/// Plain-text report: one block per section with S1 and M_rest means and SDs,
/// the paired t-test as t(df) and p, and the improvement rate.
inline std::string format_report(const Analysis& a)
{
    using detail::fmt;
    std::string out;
    out += fmt("records: %zu\n", a.records);
    out += fmt("complete games: %zu\n", a.sections[0].games);
    out += fmt("skipped rounds (fewer than %d attempts): %zu\n", kGameAttempts, a.skipped);
    for (const auto& s : a.sections) {
        out += "\n[" + s.name + "]\n";
        if (s.games == 0) {
            out += "  absent (no complete games)\n";
            continue;
        }
        out += fmt("  n = %zu\n", s.games);
        if (s.test) {
            const auto& t = *s.test;
            out += fmt("  S1      mean %.4f  sd %.4f\n", t.mean_a, t.sd_a);
            out += fmt("  M_rest  mean %.4f  sd %.4f\n", t.mean_b, t.sd_b);
            out += fmt("  M_rest - S1  mean %.4f  sd %.4f\n", t.mean_diff, t.sd_diff);
            out += fmt("  paired t(%d) = %.2f, ", t.df, t.t) + detail::format_p(t.p) + "\n";
        } else {
            out += "  t-test not computable: " + s.test_note + "\n";
        }
        out += fmt("  increased score: %zu/%zu (%.1f%%)\n", s.improvement.improved, s.improvement.games,
                   100.0 * s.improvement.fraction());
    }
    return out;
}

inline std::string analysis_report(const std::vector<RoundRecord>& records) { return format_report(analyse(records)); }

} // namespace facegame::stats
