#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "xmv/artifacts.hpp"
#include "xmv/prompts.hpp"

namespace xmv::test {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(XMV_FIXTURE_DIR) / rel; }
inline std::filesystem::path template_dir() { return XMV_TEMPLATES; }

inline XaiArtifact load_fixture(const std::string& name) { return load_artifact(fixture("artifacts/" + name).string()); }

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names = {"acsincome_shap.json", "diamonds_lime.json", "wine_ebm.json",
                                                   "cifar10_gradcampp.json", "imdb_ig.json"};
    return names;
}

inline const TemplateStore& store() {
    static const TemplateStore s = TemplateStore::load(template_dir());
    return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("xmv-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace xmv::test
