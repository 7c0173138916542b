#pragma once

// Append-only JSONL run log. One record per line; appends from concurrent
// cases are serialized and flushed before append() returns.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <vector>

#include <nlohmann/json.hpp>

namespace xmv {

class RunLog {
public:
    /// Opens `path` for appending (parent directories are created).
    explicit RunLog(const std::filesystem::path& path);

    void append(const nlohmann::json& record);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::mutex mu_;
};

/// Reads every record of a JSONL file. Blank lines are skipped; a malformed
/// line throws SchemaError naming the line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

}  // namespace xmv
