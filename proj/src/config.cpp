#include "portal/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "portal/persistence.hpp"

namespace portal {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw ConfigError("unknown config key " + where + k);
}

ProviderMode mode_from(const std::string& s) {
    if (s == "mock") return ProviderMode::Mock;
    if (s == "live") return ProviderMode::Live;
    throw ConfigError("provider mode must be mock or live, got " + s);
}

json choice_json(const ProviderChoice& c) {
    return {{"mode", c.mode == ProviderMode::Mock ? "mock" : "live"},
            {"base_url", c.live.base_url},
            {"model", c.live.model},
            {"key_env", c.live.key_env}};
}

}  // namespace

void DaemonConfig::set_all_mock() {
    for (ProviderChoice* c : {&vision, &embedding, &chat, &speech, &transcription}) c->mode = ProviderMode::Mock;
}

void DaemonConfig::set_listen(const std::string& host_port) {
    const auto colon = host_port.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("listen must be host:port");
    int port = -1;
    const std::string digits = host_port.substr(colon + 1);
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc() || p != digits.data() + digits.size()) throw ConfigError("listen port is not a number");
    listen_host = host_port.substr(0, colon);
    listen_port = port;
}

void DaemonConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("identity.threshold must be in (0, 1]");
    if (replay_mode != "off" && replay_mode != "record" && replay_mode != "replay")
        throw ConfigError("replay.mode must be off, record or replay");
    if (replay_mode != "off" && replay_dir.empty()) throw ConfigError("replay.dir is required for record/replay");
    if (!(deadline_s > 0.0)) throw ConfigError("deadline_s must be positive");
    if (retry.max_retries < 0) throw ConfigError("retry.max_retries must be >= 0");
    if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
    if (keywords.awaken.empty() || keywords.goodbye.empty()) throw ConfigError("trigger words must be non-empty");
    try {
        breathing.validate();
        LightPattern::steady(steady_level).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("light: ") + e.what());
    }
    if (!(light_sample_hz > 0.0) || !(light_event_hz > 0.0)) throw ConfigError("light rates must be positive");
    if (transcript_tail > 12) throw ConfigError("dialogue.transcript_tail must be <= 12");
    if (voices.empty()) throw ConfigError("at least one voice must be configured");
    if (listen_port < 0 || listen_port > 65535) throw ConfigError("listen port out of range");
    for (const ProviderChoice* c : {&vision, &embedding, &chat, &speech, &transcription})
        if (c->mode == ProviderMode::Live && c->live.base_url.empty())
            throw ConfigError("live provider without base_url");
}

json DaemonConfig::redacted() const {
    auto secret = [](const std::string& s) { return s.empty() ? std::string() : std::string("***"); };
    return {{"providers",
             {{"vision", choice_json(vision)},
              {"embedding", choice_json(embedding)},
              {"chat", choice_json(chat)},
              {"speech", choice_json(speech)},
              {"transcription", choice_json(transcription)}}},
            {"replay", {{"mode", replay_mode}, {"dir", replay_dir.string()}}},
            {"identity", {{"threshold", threshold}}},
            {"triggers", {{"awaken", keywords.awaken}, {"goodbye", keywords.goodbye}}},
            {"data_dir", data_dir.string()},
            {"listen", listen_host + ":" + std::to_string(listen_port)},
            {"auth", {{"participant_token", secret(participant_token)}, {"operator_token", secret(operator_token)}}},
            {"deterministic", deterministic}};
}

DaemonConfig DaemonConfig::from_json(const json& j, const fs::path& base) {
    DaemonConfig c;
    c.data_dir = default_data_dir();
    try {
        reject_unknown(j,
                       {"providers", "live", "replay", "deadline_s", "retry", "embedding_dim", "identity", "triggers",
                        "light", "dialogue", "voices", "data_dir", "listen", "auth", "camera", "fixtures_dir",
                        "templates_dir", "mock", "deterministic"},
                       "");
        const std::pair<const char*, ProviderChoice*> slots[] = {{"vision", &c.vision},
                                                                 {"embedding", &c.embedding},
                                                                 {"chat", &c.chat},
                                                                 {"speech", &c.speech},
                                                                 {"transcription", &c.transcription}};
        if (j.contains("providers")) {
            reject_unknown(j["providers"], {"vision", "embedding", "chat", "speech", "transcription"}, "providers.");
            for (auto [name, slot] : slots)
                if (j["providers"].contains(name)) slot->mode = mode_from(j["providers"][name].get<std::string>());
        }
        if (j.contains("live")) {
            for (auto [name, slot] : slots) {
                if (!j["live"].contains(name)) continue;
                const json& e = j["live"][name];
                slot->live.base_url = e.value("base_url", slot->live.base_url);
                slot->live.model = e.value("model", slot->live.model);
                slot->live.key_env = e.value("key_env", slot->live.key_env);
            }
        }
        if (j.contains("replay")) {
            c.replay_mode = j["replay"].value("mode", c.replay_mode);
            c.replay_dir = resolve(base, j["replay"].value("dir", std::string()));
        }
        c.deadline_s = j.value("deadline_s", c.deadline_s);
        if (j.contains("retry")) {
            c.retry.max_retries = j["retry"].value("max_retries", c.retry.max_retries);
            if (j["retry"].contains("backoff_ms")) {
                c.retry.backoff.clear();
                for (const auto& ms : j["retry"]["backoff_ms"])
                    c.retry.backoff.emplace_back(ms.get<std::int64_t>());
            }
        }
        c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
        if (j.contains("identity")) c.threshold = j["identity"].value("threshold", c.threshold);
        if (j.contains("triggers")) {
            c.keywords.awaken = j["triggers"].value("awaken", c.keywords.awaken);
            c.keywords.goodbye = j["triggers"].value("goodbye", c.keywords.goodbye);
        }
        if (j.contains("light")) {
            const json& l = j["light"];
            c.breathing.b_min = l.value("b_min", c.breathing.b_min);
            c.breathing.b_max = l.value("b_max", c.breathing.b_max);
            c.breathing.period_s = l.value("period_s", c.breathing.period_s);
            c.steady_level = l.value("steady", c.steady_level);
            c.light_sample_hz = l.value("sample_hz", c.light_sample_hz);
            c.light_event_hz = l.value("event_hz", c.light_event_hz);
            c.light_log = resolve(base, l.value("log_file", std::string()));
        }
        if (j.contains("dialogue")) {
            const json& d = j["dialogue"];
            c.history_count = d.value("history_count", c.history_count);
            c.relevant_count = d.value("relevant_count", c.relevant_count);
            c.transcript_tail = d.value("transcript_tail", c.transcript_tail);
        }
        if (j.contains("voices")) c.voices = j["voices"].get<std::vector<std::string>>();
        if (j.contains("data_dir")) c.data_dir = resolve(base, j["data_dir"].get<std::string>());
        if (j.contains("listen")) c.set_listen(j["listen"].get<std::string>());
        if (j.contains("auth")) {
            c.participant_token = j["auth"].value("participant_token", std::string());
            c.operator_token = j["auth"].value("operator_token", std::string());
        }
        if (j.contains("camera")) c.camera_fixture = resolve(base, j["camera"].value("fixture", std::string()));
        if (j.contains("fixtures_dir")) c.fixtures_dir = resolve(base, j["fixtures_dir"].get<std::string>());
        if (j.contains("templates_dir")) c.templates_dir = resolve(base, j["templates_dir"].get<std::string>());
        if (j.contains("mock")) {
            const json& m = j["mock"];
            c.mock_chat_script = resolve(base, m.value("chat_script", std::string()));
            if (m.contains("transcripts")) c.mock_transcripts = m["transcripts"].get<std::map<std::string, std::string>>();
        }
        if (j.contains("deterministic")) {
            c.deterministic = j["deterministic"].value("enabled", false);
            c.seed = j["deterministic"].value("seed", c.seed);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

DaemonConfig DaemonConfig::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + file.string() + ": " + e.what());
    }
    return from_json(j, file.parent_path());
}

}  // namespace portal
