#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "facegame/core/emotion.hpp"
#include "facegame/core/image.hpp"
#include "facegame/ferlab/cnn.hpp"

namespace facegame::ferlab {

namespace fs = std::filesystem;

class LabeledImageSet
{
public:
    LabeledImageSet() = default;
    explicit LabeledImageSet(std::string name) : name_(std::move(name)) {}

    LabeledImageSet(std::string name, std::vector<GrayImage> images, std::vector<Emotion> labels)
        : name_(std::move(name)), images_(std::move(images)), labels_(std::move(labels))
    {
        if (images_.size() != labels_.size()) {
            throw ShapeMismatch(std::to_string(images_.size()) + " images but " + std::to_string(labels_.size()) +
                                " labels");
        }
    }

    void add(GrayImage image, Emotion label)
    {
        images_.push_back(std::move(image));
        labels_.push_back(label);
    }

    void append(const LabeledImageSet& other)
    {
        images_.insert(images_.end(), other.images_.begin(), other.images_.end());
        labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t size() const noexcept { return images_.size(); }
    bool empty() const noexcept { return images_.empty(); }
    const std::vector<GrayImage>& images() const noexcept { return images_; }
    const std::vector<Emotion>& labels() const noexcept { return labels_; }

    std::array<std::size_t, kEmotionCount> class_counts() const
    {
        std::array<std::size_t, kEmotionCount> c{};
        for (auto e : labels_) ++c[static_cast<std::size_t>(e)];
        return c;
    }

    std::size_t count(Emotion e) const { return class_counts()[static_cast<std::size_t>(e)]; }

private:
    std::string name_;
    std::vector<GrayImage> images_;
    std::vector<Emotion> labels_;
};

struct SamplePair
{
    LabeledImageSet train;
    LabeledImageSet test;
    std::uint64_t seed = 0;
    std::vector<std::size_t> train_indices; // into the source set
    std::vector<std::size_t> test_indices;
};

/// Per class, draws n_train + n_test distinct instances; the first n_train go to
/// training. Both splits are ordered by class, then by draw order.
inline SamplePair balanced_sample(const LabeledImageSet& data, std::size_t n_train = 200, std::size_t n_test = 50,
                                  std::uint64_t seed = 1)
{
    std::array<std::vector<std::size_t>, kEmotionCount> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels()[i])].push_back(i);
    const std::size_t need = n_train + n_test;
    for (auto e : kAllEmotions) {
        const auto have = by_class[static_cast<std::size_t>(e)].size();
        if (have < need) {
            throw InsufficientClassData("class " + std::string(to_string(e)) + " has " + std::to_string(have) +
                                        " instances, need " + std::to_string(need));
        }
    }
    SamplePair p{LabeledImageSet(data.name() + "/train"), LabeledImageSet(data.name() + "/test"), seed, {}, {}};
    std::mt19937_64 rng(seed);
    for (auto e : kAllEmotions) {
        auto pool = by_class[static_cast<std::size_t>(e)];
        // partial Fisher-Yates: the first `need` slots become a uniform draw without replacement
        for (std::size_t i = 0; i < need; ++i) std::swap(pool[i], pool[i + rng() % (pool.size() - i)]);
        for (std::size_t i = 0; i < need; ++i) {
            const std::size_t k = pool[i];
            if (i < n_train) {
                p.train.add(data.images()[k], e);
                p.train_indices.push_back(k);
            } else {
                p.test.add(data.images()[k], e);
                p.test_indices.push_back(k);
            }
        }
    }
    return p;
}

// ---- directory layout ------------------------------------------------------------------
//
// A dataset directory holds manifest.jsonl; each line is an object with
// "frame_ref" (image path relative to the directory, PGM/PPM, or null) and
// "emotion" (integer code 0..5 or lowercase name). Other fields are ignored, so
// a dataset-forge export directory loads as is.

inline constexpr const char* kDatasetManifest = "manifest.jsonl";

inline Emotion emotion_field(const nlohmann::json& v)
{
    if (v.is_number_integer()) return emotion_from_int(v.get<int>());
    if (v.is_string()) return parse_emotion(v.get<std::string>());
    throw UnknownEmotion("emotion must be an integer code or a name");
}

/// Loads every entry with a frame, resized to side x side.
inline LabeledImageSet load_image_dir(const fs::path& dir, std::size_t side)
{
    std::ifstream in(dir / kDatasetManifest);
    if (!in) throw BadImage("no " + std::string(kDatasetManifest) + " in " + dir.string());
    LabeledImageSet set(dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string());
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw BadImage(dir.string() + " manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto ref = j.find("frame_ref");
        if (ref == j.end() || ref->is_null()) continue;
        auto img = read_image(dir / ref->get<std::string>());
        const int s = static_cast<int>(side);
        if (img.width() != s || img.height() != s) img = resize_bilinear(img, s, s);
        set.add(std::move(img), emotion_field(j.at("emotion")));
    }
    return set;
}

/// Writes images/<emotion>/<i>.pgm plus manifest.jsonl.
inline void save_image_dir(const LabeledImageSet& set, const fs::path& dir)
{
    fs::create_directories(dir);
    std::ofstream out(dir / kDatasetManifest, std::ios::trunc);
    if (!out) throw BadImage("cannot write " + (dir / kDatasetManifest).string());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto name = std::string(to_string(set.labels()[i]));
        const auto rel = fs::path("images") / name / (std::to_string(i) + ".pgm");
        fs::create_directories(dir / rel.parent_path());
        write_pgm(dir / rel, set.images()[i]);
        nlohmann::ordered_json j;
        j["frame_ref"] = rel.generic_string();
        j["emotion"] = to_int(set.labels()[i]);
        j["emotion_name"] = name;
        out << j.dump() << '\n';
    }
}

} // namespace facegame::ferlab
