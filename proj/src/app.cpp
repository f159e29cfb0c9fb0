#include "portal/app.hpp"

#include <cstdlib>
#include <fstream>

#include <spdlog/spdlog.h>

#include "portal/http_providers.hpp"
#include "portal/mock_providers.hpp"

namespace portal {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<http::HttpTransport> make_transport(const DaemonConfig& c, const LiveEndpoint& live) {
    if (c.replay_mode == "replay") return std::make_shared<http::ReplayTransport>(c.replay_dir.string());
    auto direct = std::make_shared<http::HttplibTransport>(
        live.base_url, std::chrono::milliseconds(static_cast<std::int64_t>(c.deadline_s * 1000.0)));
    if (c.replay_mode == "record") return std::make_shared<http::RecordingTransport>(direct, c.replay_dir.string());
    return direct;
}

http::Endpoint make_endpoint(const DaemonConfig& c, const LiveEndpoint& live) {
    std::string key;
    if (const char* v = std::getenv(live.key_env.c_str())) key = v;
    // Replayed fixtures never reach the network; any key will do.
    if (key.empty() && c.replay_mode == "replay") key = "replay";
    return {make_transport(c, live), key, live.model};
}

std::vector<std::string> load_chat_script(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read chat script " + file.string());
    const auto j = nlohmann::json::parse(in);
    if (!j.is_array()) throw ConfigError("chat script must be a JSON array of strings");
    return j.get<std::vector<std::string>>();
}

}  // namespace

ProviderSet build_providers(const DaemonConfig& c) {
    ProviderSet live;
    ProviderSet out;
    if (c.vision.mode == ProviderMode::Live)
        live.vision = std::make_shared<http::HttpVision>(make_endpoint(c, c.vision.live));
    else
        out.vision = std::make_shared<mock::MockVision>();
    if (c.embedding.mode == ProviderMode::Live)
        live.embedding = std::make_shared<http::HttpEmbedding>(make_endpoint(c, c.embedding.live), c.embedding_dim);
    else
        out.embedding = std::make_shared<mock::MockEmbedding>(c.embedding_dim);
    if (c.chat.mode == ProviderMode::Live)
        live.chat = std::make_shared<http::HttpChat>(make_endpoint(c, c.chat.live));
    else if (!c.mock_chat_script.empty())
        out.chat = std::make_shared<mock::ScriptedChat>(load_chat_script(c.mock_chat_script));
    else
        out.chat = std::make_shared<mock::SyntheticChat>(c.voices);
    if (c.speech.mode == ProviderMode::Live)
        live.speech = std::make_shared<http::HttpSpeech>(make_endpoint(c, c.speech.live));
    else
        out.speech = std::make_shared<mock::MockSpeech>();
    if (c.transcription.mode == ProviderMode::Live) {
        live.transcription = std::make_shared<http::HttpTranscription>(make_endpoint(c, c.transcription.live));
    } else {
        auto stt = std::make_shared<mock::MockTranscription>();
        if (!c.mock_transcripts.empty()) stt->add_fixtures(c.fixtures_dir.string(), c.mock_transcripts);
        out.transcription = stt;
    }

    const ProviderSet wrapped = with_retries(live, c.retry, real_sleeper());
    if (live.vision) out.vision = wrapped.vision;
    if (live.embedding) out.embedding = wrapped.embedding;
    if (live.chat) out.chat = wrapped.chat;
    if (live.speech) out.speech = wrapped.speech;
    if (live.transcription) out.transcription = wrapped.transcription;
    return out;
}

PortalApp::PortalApp(DaemonConfig config, AppOverrides o) : config_(std::move(config)) {
    config_.validate();
    if (o.clock)
        clock_ = o.clock;
    else if (config_.deterministic)
        clock_ = std::make_shared<ManualClock>();
    else
        clock_ = std::make_shared<SystemClock>();
    if (o.ids)
        ids_ = o.ids;
    else if (config_.deterministic)
        ids_ = std::make_shared<SeededIdSource>(config_.seed);
    else
        ids_ = std::make_shared<RandomIdSource>();

    store_ = std::make_unique<Store>(StoreLayout::under(config_.data_dir));
    registry_ = std::make_unique<Registry>(*store_);
    for (const auto& w : registry_->load_warnings()) spdlog::warn("registry: {}", w);
    Registry* reg = registry_.get();
    memory_ = std::make_unique<MemoryStore>(*store_, *clock_, *ids_,
                                            [reg](const std::string& id) { return reg->contains(id); });

    if (o.camera)
        camera_ = o.camera;
    else if (!config_.camera_fixture.empty())
        camera_ = std::make_shared<FixtureCamera>(config_.camera_fixture.string());
    else
        camera_ = std::make_shared<NoCamera>();
    audio_ = o.audio ? o.audio : std::make_shared<NullAudioSink>();

    light_ = std::make_unique<LightController>();
    const fs::path light_log = config_.light_log.empty() ? config_.data_dir / "light.log" : config_.light_log;
    light_->add_sink(std::make_shared<LogFileLightSink>(light_log.string()));

    providers_ = o.providers ? *o.providers : build_providers(config_);
    if (!providers_.complete()) throw ConfigError("provider set is incomplete");

    EngineSettings settings;
    settings.threshold = config_.threshold;
    settings.keywords = config_.keywords;
    settings.request_light = LightPattern::steady(config_.steady_level);
    settings.conversation_light = config_.breathing;
    settings.history_count = config_.history_count;
    settings.relevant_count = config_.relevant_count;
    settings.transcript_tail = config_.transcript_tail;
    settings.voices = config_.voices;

    PromptTemplates templates =
        config_.templates_dir.empty() ? PromptTemplates::defaults() : PromptTemplates::load(config_.templates_dir);
    engine_ = std::make_unique<RitualEngine>(EngineDeps{providers_, *store_, *registry_, *memory_, *camera_, *light_,
                                                        *audio_, *clock_, *ids_, std::move(templates)},
                                             std::move(settings));
}

PortalApp::~PortalApp() { shutdown(); }

void PortalApp::start_light(double hz) { light_->start(hz); }

void PortalApp::shutdown() {
    if (engine_) engine_->shutdown();
    if (light_) light_->stop();
}

VisionRequest PortalApp::resolve_image_ref(const std::string& ref) const {
    if (ref.empty()) throw std::invalid_argument("empty image_ref");
    if (ref.starts_with("images/")) {
        Bytes bytes;
        try {
            bytes = store_->read_image(ref);
        } catch (const StorageError& e) {
            throw std::invalid_argument(e.what());
        }
        const bool png = ref.ends_with(".png");
        return VisionRequest{bytes, png ? "image/png" : "image/jpeg"};
    }
    const fs::path rel(ref);
    if (rel.is_absolute() || rel.has_parent_path() || ref == "." || ref == "..")
        throw std::invalid_argument("image_ref must be a fixture file name or an images/ ref");
    if (config_.fixtures_dir.empty()) throw std::invalid_argument("no fixtures directory configured");
    const fs::path path = config_.fixtures_dir / rel;
    if (!fs::is_regular_file(path)) throw std::invalid_argument("unknown image_ref " + ref);
    return vision_request_from_file(path.string());
}

}  // namespace portal
