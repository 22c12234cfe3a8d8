#pragma once

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "facegame/core/image.hpp"
#include "facegame/core/records.hpp"
#include "facegame/error.hpp"

// On-disk layout of a store directory:
//
//   records.jsonl   one RoundRecord per line (see to_json(RoundRecord))
//   sessions.jsonl  session and round lifecycle events
//   failures.jsonl  attempts rejected by the feature pipeline
//   frames/         <record_id>.pgm, referenced by RoundRecord::frame_ref
//
// All three logs are append-only. A line is written with a single write(2) on
// an O_APPEND descriptor, so concurrent readers see whole lines or nothing
// except after a crash mid-write; readers drop a torn final line.
namespace facegame::game {

namespace fs = std::filesystem;

inline constexpr const char* kRecordLog = "records.jsonl";
inline constexpr const char* kSessionLog = "sessions.jsonl";
inline constexpr const char* kFailureLog = "failures.jsonl";
inline constexpr const char* kFrameDir = "frames";

namespace detail {

inline void append_line(const fs::path& path, const std::string& line)
{
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw StoreError("cannot open " + path.string() + ": " + std::strerror(errno));
    const std::string data = line + '\n';
    const ssize_t n = ::write(fd, data.data(), data.size());
    const int err = errno;
    ::close(fd);
    if (n != static_cast<ssize_t>(data.size())) {
        throw StoreError("short write to " + path.string() + (n < 0 ? std::string(": ") + std::strerror(err) : ""));
    }
}

} // namespace detail

/// Reads a JSON-lines file. A missing file is empty. An unparsable last line is
/// treated as a torn write and dropped; an unparsable line elsewhere throws.
inline std::vector<nlohmann::json> read_jsonl(const fs::path& path)
{
    std::vector<nlohmann::json> out;
    std::ifstream in(path);
    if (!in) return out;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto j = nlohmann::json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) {
            if (i + 1 == lines.size()) break;
            throw StoreError(path.string() + ": malformed line " + std::to_string(i + 1));
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline std::vector<RoundRecord> read_records(const fs::path& store_dir)
{
    std::vector<RoundRecord> out;
    std::size_t line = 0;
    for (const auto& j : read_jsonl(store_dir / kRecordLog)) {
        ++line;
        try {
            out.push_back(round_record_from_json(j));
        } catch (const std::exception& e) {
            throw StoreError((store_dir / kRecordLog).string() + " line " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

class RecordStore
{
public:
    explicit RecordStore(fs::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        fs::create_directories(dir_ / kFrameDir, ec);
        if (ec) throw StoreError("cannot create " + (dir_ / kFrameDir).string() + ": " + ec.message());
        std::uint64_t last = 0;
        for (const auto& j : read_jsonl(dir_ / kRecordLog)) last = std::max(last, j.value("record_id", std::uint64_t{0}));
        next_id_ = last + 1;
    }

    RecordStore(const RecordStore&) = delete;
    RecordStore& operator=(const RecordStore&) = delete;

    const fs::path& dir() const noexcept { return dir_; }

    std::uint64_t reserve_record_id() { return next_id_.fetch_add(1); }

    /// Writes the frame as 8-bit PGM and returns its store-relative reference.
    std::string save_frame(std::uint64_t record_id, const GrayImage& frame)
    {
        const std::string ref = std::string(kFrameDir) + "/" + std::to_string(record_id) + ".pgm";
        const fs::path tmp = dir_ / (ref + ".tmp");
        try {
            write_pgm(tmp, frame);
            fs::rename(tmp, dir_ / ref);
        } catch (const std::exception& e) {
            throw StoreError(std::string("cannot save frame: ") + e.what());
        }
        return ref;
    }

    void append(const RoundRecord& r) { locked_append(kRecordLog, to_json(r)); }
    void append_event(const nlohmann::json& j) { locked_append(kSessionLog, j); }
    void append_failure(const nlohmann::json& j) { locked_append(kFailureLog, j); }

    std::vector<RoundRecord> records() const { return read_records(dir_); }
    std::vector<nlohmann::json> events() const { return read_jsonl(dir_ / kSessionLog); }
    std::vector<nlohmann::json> failures() const { return read_jsonl(dir_ / kFailureLog); }

private:
    void locked_append(const char* name, const nlohmann::json& j)
    {
        const std::string line = j.dump();
        std::lock_guard lock(write_mutex_);
        detail::append_line(dir_ / name, line);
    }

    fs::path dir_;
    std::atomic<std::uint64_t> next_id_{1};
    std::mutex write_mutex_;
};

} // namespace facegame::game
