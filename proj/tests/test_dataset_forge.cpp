#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "facegame/forge/cooccurrence.hpp"
#include "facegame/forge/dataset.hpp"
#include "support/game_fixture.hpp"
#include "support/records.hpp"

using namespace facegame;
using namespace facegame::forge;
using support::make_record;
using support::scored_record;

namespace {

AUSet S(std::initializer_list<int> codes) { return au_set_from_codes(codes); }

std::vector<double> scores_of(const std::vector<RoundRecord>& rs)
{
    std::vector<double> out;
    for (const auto& r : rs) out.push_back(r.score);
    return out;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes each record's frame into <store>/frames so export can copy it.
void write_frames(const fs::path& store, std::vector<RoundRecord>& records)
{
    fs::create_directories(store / "frames");
    for (auto& r : records) {
        r.frame_ref = "frames/" + std::to_string(r.record_id) + ".pgm";
        write_pgm(store / *r.frame_ref, GrayImage(4, 4, static_cast<double>(r.record_id % 255) / 255.0));
    }
}

} // namespace

// ---- filter -------------------------------------------------------------------

TEST(FilterRecords, BoundaryScoreIsKept)
{
    const std::vector<RoundRecord> rs{scored_record(1, 0.2), scored_record(2, 1.0 / 3.0), scored_record(3, 0.5)};
    EXPECT_EQ(scores_of(filter_records(rs, 1.0 / 3.0)), (std::vector<double>{1.0 / 3.0, 0.5}));
}

TEST(FilterRecords, JaccardOneThirdMeetsTheThreshold)
{
    // 1 shared AU out of 3 in the union
    const auto r = make_record(1, Emotion::fear, S({1, 2}), S({2, 5}));
    EXPECT_EQ(filter_records({r}, 1.0 / 3.0).size(), 1u);
}

TEST(FilterRecords, ZeroKeepsEverything)
{
    const auto rs = support::random_records(50, 1);
    EXPECT_EQ(filter_records(rs, 0.0).size(), 50u);
}

TEST(FilterRecords, OneKeepsOnlyPerfect)
{
    const auto rs = support::random_records(300, 2);
    for (const auto& r : filter_records(rs, 1.0)) EXPECT_EQ(r.player_au_set, r.target_au_set);
    std::vector<RoundRecord> with_perfect = rs;
    with_perfect.push_back(make_record(999, Emotion::anger, S({4}), S({4})));
    EXPECT_FALSE(filter_records(with_perfect, 1.0).empty());
}

TEST(FilterRecords, OutOfRangeThresholdIsRejected)
{
    EXPECT_THROW(filter_records({}, -0.1), BadRequest);
    EXPECT_THROW(filter_records({}, 1.5), BadRequest);
}

TEST(FilterRecords, IdempotentAndAntiMonotone)
{
    const auto rs = support::random_records(400, 3);
    for (double t1 = 0.0; t1 <= 1.0; t1 += 0.05) {
        const auto once = filter_records(rs, t1);
        ASSERT_EQ(filter_records(once, t1), once);
        for (double t2 = t1; t2 <= 1.0; t2 += 0.05) {
            const auto tighter = filter_records(rs, t2);
            ASSERT_LE(tighter.size(), once.size());
            for (const auto& r : tighter) {
                ASSERT_NE(std::find(once.begin(), once.end(), r), once.end());
            }
        }
    }
}

// ---- export -------------------------------------------------------------------

TEST(ExportDataset, EmptyRecordSet)
{
    support::TempDir out("export-empty");
    const auto m = export_dataset({}, 1.0 / 3.0, out.path(), out.path() / "ds");
    EXPECT_TRUE(m.entries.empty());
    EXPECT_EQ(m.histogram, Histogram{});
    EXPECT_TRUE(read_manifest(out.path() / "ds").empty());
}

TEST(ExportDataset, HistogramCountsKeptRecordsPerEmotion)
{
    support::TempDir dir("export-hist");
    std::vector<RoundRecord> rs{make_record(1, Emotion::happiness, S({6, 12}), S({6, 12})),
                                make_record(2, Emotion::happiness, S({12}), S({6, 12})),
                                make_record(3, Emotion::sadness, S({1, 4, 15}), S({1, 4, 15})),
                                make_record(4, Emotion::anger, S({}), S({4}))};
    write_frames(dir.path(), rs);
    const auto m = export_dataset(rs, 1.0 / 3.0, dir.path(), dir.path() / "ds");
    Histogram expected{};
    expected[static_cast<std::size_t>(Emotion::happiness)] = 2;
    expected[static_cast<std::size_t>(Emotion::sadness)] = 1;
    EXPECT_EQ(m.histogram, expected);
    EXPECT_TRUE(m.missing_frames.empty());

    const auto summary = nlohmann::json::parse(slurp(dir.path() / "ds" / kSummaryFile));
    EXPECT_EQ(summary["histogram_counts"], nlohmann::json({0, 0, 0, 2, 1, 0}));
    EXPECT_EQ(summary["rule"], "score >= threshold");
}

TEST(ExportDataset, HistogramKeysFollowEmotionEncoding)
{
    support::TempDir dir("export-order");
    export_dataset({}, 0.5, dir.path(), dir.path() / "ds");
    const auto text = slurp(dir.path() / "ds" / kSummaryFile);
    std::size_t last = 0;
    for (auto e : kAllEmotions) {
        const auto pos = text.find("\"" + std::string(to_string(e)) + "\"");
        ASSERT_NE(pos, std::string::npos);
        EXPECT_GT(pos, last);
        last = pos;
    }
}

TEST(ExportDataset, ManifestIsLosslessAndAboveThreshold)
{
    support::TempDir dir("export-lossless");
    auto rs = support::random_records(200, 4);
    write_frames(dir.path(), rs);
    const double tau = 0.25;
    const auto m = export_dataset(rs, tau, dir.path(), dir.path() / "ds");
    const auto back = read_manifest(dir.path() / "ds");
    ASSERT_EQ(back, m.entries);
    const auto kept = filter_records(rs, tau);
    ASSERT_EQ(back.size(), kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        EXPECT_GE(back[i].score, tau);
        EXPECT_EQ(back[i].score, kept[i].score);
        EXPECT_EQ(back[i].emotion, kept[i].emotion);
        EXPECT_EQ(back[i].au_set, kept[i].player_au_set);
        EXPECT_EQ(back[i].attempt_index, kept[i].attempt_index);
        ASSERT_TRUE(back[i].frame_ref);
        EXPECT_EQ(slurp(dir.path() / "ds" / *back[i].frame_ref), slurp(dir.path() / *kept[i].frame_ref));
    }
}

TEST(ExportDataset, ManifestFieldOrderIsStable)
{
    support::TempDir dir("export-fields");
    std::vector<RoundRecord> rs{make_record(7, Emotion::surprise, S({1, 2}), S({1, 2, 5}))};
    write_frames(dir.path(), rs);
    export_dataset(rs, 0.0, dir.path(), dir.path() / "ds");
    std::ifstream in(dir.path() / "ds" / kManifestFile);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, R"({"record_id":7,"frame_ref":"images/surprise/7.pgm","emotion":5,"emotion_name":"surprise",)"
                    R"("au_set":[1,2],"score":0.6666666666666666,"session_id":"s1","round_id":"r1","attempt_index":1})");
}

TEST(ExportDataset, MissingFramesAreListedAndExportContinues)
{
    support::TempDir dir("export-missing");
    auto rs = support::random_records(10, 5);
    write_frames(dir.path(), rs);
    fs::remove(dir.path() / *rs[3].frame_ref);
    rs[6].frame_ref.reset();
    const auto m = export_dataset(rs, 0.0, dir.path(), dir.path() / "ds");
    EXPECT_EQ(m.entries.size(), 10u);
    EXPECT_EQ(m.missing_frames, (std::vector<std::uint64_t>{rs[3].record_id, rs[6].record_id}));
    EXPECT_FALSE(m.entries[3].frame_ref);
    EXPECT_THROW(export_dataset(rs, 0.0, dir.path(), dir.path() / "ds2", true), MissingFrame);
}

// ---- co-occurrence ---------------------------------------------------------------

TEST(Cooccurrence, SmallExample)
{
    const std::vector<RoundRecord> rs{make_record(1, Emotion::happiness, S({6, 12}), S({6, 12})),
                                      make_record(2, Emotion::happiness, S({12}), S({6, 12}))};
    const auto m = cooccurrence(rs, 0.0);
    EXPECT_EQ(m.at(Emotion::happiness, ActionUnit(12)), 2u);
    EXPECT_EQ(m.at(Emotion::happiness, ActionUnit(6)), 1u);
    EXPECT_EQ(m.total(), 3u);
    EXPECT_EQ(m.records_used, 2u);
}

TEST(Cooccurrence, AllBelowThresholdGivesZeroMatrix)
{
    const std::vector<RoundRecord> rs{make_record(1, Emotion::anger, S({1}), S({4})),
                                      make_record(2, Emotion::fear, S({2}), S({4, 5}))};
    const auto m = cooccurrence(rs, 1.0 / 3.0);
    EXPECT_EQ(m.total(), 0u);
    EXPECT_EQ(m.records_used, 0u);
}

// Recount every cell by looping over records and catalog codes.
TEST(Cooccurrence, AgreesWithBruteForceRecount)
{
    const auto rs = support::random_records(500, 6);
    for (double tau : {0.0, 0.2, 1.0 / 3.0, 0.6}) {
        const auto m = cooccurrence(rs, tau);
        std::uint64_t total = 0;
        for (const auto& r : rs) {
            if (r.score >= tau) total += r.player_au_set.size();
        }
        EXPECT_EQ(m.total(), total);
        for (auto e : kAllEmotions) {
            std::uint64_t row = 0;
            for (const auto& entry : kAuCatalog) {
                std::uint64_t n = 0;
                for (const auto& r : rs) {
                    if (r.score >= tau && r.emotion == e) {
                        for (int code : r.player_au_set.codes()) n += code == entry.code;
                    }
                }
                ASSERT_EQ(m.at(e, ActionUnit(entry.code)), n);
                ASSERT_GE(m.row_sum(e), n);
                row += n;
            }
            EXPECT_EQ(m.row_sum(e), row);
        }
    }
}

TEST(Cooccurrence, SignatureAusDominateTheirRows)
{
    std::mt19937_64 rng(8);
    std::vector<RoundRecord> rs;
    std::uint64_t id = 0;
    for (int i = 0; i < 200; ++i) {
        AUSet noise = AUSet::from_mask(static_cast<AUSet::Mask>(rng() & rng() & AUSet::all().mask()));
        rs.push_back(make_record(++id, Emotion::happiness, noise | S({12}), S({6, 12})));
        rs.push_back(make_record(++id, Emotion::surprise, noise | S({25, 26}), S({1, 2, 25, 26})));
    }
    const auto m = cooccurrence(rs, 0.0);
    EXPECT_EQ(m.argmax(Emotion::happiness), ActionUnit(12));
    const auto top = m.argmax(Emotion::surprise);
    EXPECT_TRUE(top == ActionUnit(25) || top == ActionUnit(26));
    EXPECT_EQ(m.at(Emotion::surprise, ActionUnit(25)), 200u);
    EXPECT_EQ(m.at(Emotion::surprise, ActionUnit(26)), 200u);
}

// ---- heatmap ---------------------------------------------------------------------

TEST(RenderHeatmap, ZeroMatrixIsAllZero)
{
    const auto img = heatmap_raster(CooccurrenceMatrix{});
    EXPECT_EQ(img.width(), 20 * kHeatmapCell);
    EXPECT_EQ(img.height(), 6 * kHeatmapCell);
    for (double v : img.pixels()) ASSERT_EQ(v, 0.0);
}

TEST(RenderHeatmap, SingleCellLightsExactlyOneBlock)
{
    CooccurrenceMatrix m;
    m.counts[2][7] = 5;
    const auto img = heatmap_raster(m);
    int lit = 0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (img.at(x, y) > 0.0) {
                ++lit;
                ASSERT_EQ(x / kHeatmapCell, 7);
                ASSERT_EQ(y / kHeatmapCell, 2);
            }
        }
    }
    EXPECT_EQ(lit, kHeatmapCell * kHeatmapCell);
}

TEST(RenderHeatmap, ByteIdenticalAcrossRuns)
{
    support::TempDir dir("heatmap");
    const auto m = cooccurrence(support::random_records(100, 9), 0.2);
    const auto raster1 = render_heatmap(m, dir.path() / "a.txt");
    const auto raster2 = render_heatmap(m, dir.path() / "b.txt");
    EXPECT_EQ(raster1.filename(), "a.pgm");
    EXPECT_EQ(slurp(dir.path() / "a.txt"), slurp(dir.path() / "b.txt"));
    EXPECT_EQ(slurp(raster1), slurp(raster2));
}

TEST(RenderHeatmap, TextTableCarriesEveryValue)
{
    CooccurrenceMatrix m;
    m.counts[3][9] = 42; // happiness, AU12
    m.records_used = 42;
    const auto text = to_text(m);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line); // comment
    std::getline(in, line); // header
    EXPECT_NE(line.find("AU12"), std::string::npos);
    int row = 0;
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string name;
        cells >> name;
        EXPECT_EQ(name, to_string(kAllEmotions[static_cast<std::size_t>(row)]));
        for (std::size_t k = 0; k < kAuCount; ++k) {
            std::uint64_t v;
            cells >> v;
            EXPECT_EQ(v, m.counts[static_cast<std::size_t>(row)][k]);
        }
        ++row;
    }
    EXPECT_EQ(row, 6);
}
