#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "portal/app.hpp"
#include "portal/dialogue.hpp"
#include "portal/mock_providers.hpp"

namespace portal::test {

namespace fs = std::filesystem;

// Fresh directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "portal-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline fs::path fixture(const std::string& name) { return fs::path(PORTAL_FIXTURE_DIR) / name; }

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string persona_sheet(const std::string& name, const std::string& voice = "warm") {
    return nlohmann::json{{"name", name},
                          {"traits", {"patient", "curious", "wry"}},
                          {"speaking_style", "slow and warm"},
                          {"backstory", "It has held tea for years."},
                          {"voice_id", voice},
                          {"mood_seed", "content"}}
        .dump();
}

inline std::string turn_text(const std::string& inner, double intent, bool speak, const std::string& response) {
    return format_two_tier(TwoTierTurn{inner, intent, speak, response});
}

inline VisionRequest image_of(std::string_view seed) {
    return VisionRequest{to_bytes(seed), "image/png"};
}

// Mock-backed app with a stepped clock and seeded ids.
inline DaemonConfig test_config(const fs::path& data_dir) {
    DaemonConfig c;
    c.data_dir = data_dir;
    c.fixtures_dir = PORTAL_FIXTURE_DIR;
    c.deterministic = true;
    c.seed = 7;
    c.voices = {"warm", "bright", "hushed"};
    return c;
}

inline std::unique_ptr<PortalApp> make_app(const fs::path& data_dir, const mock::MockSet& mocks,
                                           DaemonConfig config = {}) {
    if (config.data_dir.empty()) config = test_config(data_dir);
    AppOverrides o;
    o.providers = mocks.providers();
    return std::make_unique<PortalApp>(std::move(config), std::move(o));
}

inline void quiet_logs() { spdlog::set_level(spdlog::level::off); }

}  // namespace portal::test
