#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "portal/providers.hpp"
#include "portal/ritual.hpp"

namespace portal {

enum class ProviderMode { Mock, Live };

struct LiveEndpoint {
    std::string base_url;
    std::string model;
    std::string key_env;  // environment variable holding the bearer token
};

struct ProviderChoice {
    ProviderMode mode = ProviderMode::Mock;
    LiveEndpoint live;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Daemon configuration. Loaded from a JSON file; every field has a
// default so an empty object is a valid all-mock configuration.
struct DaemonConfig {
    ProviderChoice vision{ProviderMode::Mock, {"https://api.openai.com", "gpt-4o", "PORTAL_VISION_KEY"}};
    ProviderChoice embedding{ProviderMode::Mock, {"https://api.openai.com", "clip-vit-b-32", "PORTAL_EMBED_KEY"}};
    ProviderChoice chat{ProviderMode::Mock, {"https://api.openai.com", "gpt-4o", "PORTAL_CHAT_KEY"}};
    ProviderChoice speech{ProviderMode::Mock, {"https://api.elevenlabs.io", "eleven_turbo_v2_5", "PORTAL_TTS_KEY"}};
    ProviderChoice transcription{ProviderMode::Mock, {"https://api.openai.com", "whisper-1", "PORTAL_STT_KEY"}};

    std::string replay_mode = "off";  // off | record | replay
    std::filesystem::path replay_dir;
    double deadline_s = 30.0;
    RetryPolicy retry;
    std::size_t embedding_dim = 512;

    double threshold = 0.85;
    KeywordSet keywords;
    LightPattern breathing = LightPattern::breathing(0.15, 0.9, 4.0);
    double steady_level = 0.9;
    double light_sample_hz = 30.0;
    double light_event_hz = 5.0;
    std::filesystem::path light_log;  // empty: <data_dir>/light.log

    std::size_t history_count = 6;
    std::size_t relevant_count = 4;
    std::size_t transcript_tail = 12;
    std::vector<std::string> voices{"warm", "bright", "hushed"};

    std::filesystem::path data_dir;
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::string participant_token;
    std::string operator_token;

    std::filesystem::path camera_fixture;  // empty: no camera
    std::filesystem::path fixtures_dir;    // resolves image_ref and mock audio fixtures
    std::filesystem::path templates_dir;

    std::filesystem::path mock_chat_script;  // JSON array of replies; empty: synthetic replies
    std::map<std::string, std::string> mock_transcripts;  // fixture file -> transcript

    bool deterministic = false;  // seeded ids and a stepped clock
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
    void set_all_mock();
    void set_listen(const std::string& host_port);  // "host:port"
    nlohmann::json redacted() const;

    // Relative paths resolve against `base_dir`.
    static DaemonConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static DaemonConfig load(const std::filesystem::path& file);
};

}  // namespace portal
