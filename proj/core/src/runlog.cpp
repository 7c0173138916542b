#include "xmv/runlog.hpp"

#include <string>

#include "xmv/errors.hpp"

namespace xmv {

RunLog::RunLog(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app | std::ios::binary);
    if (!out_) throw IoError("cannot open run log '" + path.string() + "' for appending");
}

void RunLog::append(const nlohmann::json& record) {
    const auto line = record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw IoError("write to run log '" + path_.string() + "' failed");
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path.string() + ": line " + std::to_string(n) + ": malformed JSON (" + e.what() + ")");
        }
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (const auto& r : records) out << r.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace xmv
