#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "portal/devices.hpp"
#include "portal/dialogue.hpp"
#include "portal/identity.hpp"
#include "portal/memory.hpp"
#include "portal/ritual.hpp"

namespace portal {

enum class ApiEventKind { PhaseChanged, TranscriptAppended, InnerThoughts, LightSample, ObjectBound, SessionClosed };
std::string_view to_string(ApiEventKind k);

struct EngineEvent {
    ApiEventKind kind = ApiEventKind::PhaseChanged;
    nlohmann::json payload;
    Timestamp ts;
    bool operator_only = false;  // InnerThoughts never reach participants
};

using EventListener = std::function<void(const EngineEvent&)>;

struct EngineSettings {
    double threshold = kDefaultMatchThreshold;
    KeywordSet keywords;
    LightPattern request_light = LightPattern::steady(0.9);
    LightPattern conversation_light = LightPattern::breathing(0.15, 0.9, 4.0);
    std::size_t history_count = 6;
    std::size_t relevant_count = 4;
    std::size_t transcript_tail = PromptContext::kMaxTranscriptTail;
    std::vector<std::string> voices{"warm"};
};

struct EngineDeps {
    ProviderSet providers;
    Store& store;
    Registry& registry;
    MemoryStore& memory;
    Camera& camera;
    LightController& light;
    AudioSink& audio;
    Clock& clock;
    IdSource& ids;
    PromptTemplates templates = PromptTemplates::defaults();
};

struct CommandResult {
    enum class Code { Ok, NoSession, SessionActive, BadRequest, Failed };

    Code code = Code::Ok;
    std::string error;
    RitualPhase phase = RitualPhase::Idle;
    std::optional<std::string> session_id;
    std::optional<std::string> object_id;
    bool was_new = false;
    std::optional<std::string> reply;  // public response of a conversation turn
    bool silent = false;
    std::vector<TranscriptEntry> appended;

    bool ok() const { return code == Code::Ok; }
};

struct SessionView {
    std::string session_id;
    std::optional<ObjectProfile> object;
    bool was_new = false;
    Timestamp started_at;
    std::vector<TranscriptEntry> transcript;
    std::vector<InnerThoughtsEntry> inner_thoughts;  // operator channel only
};

struct EngineSnapshot {
    RitualPhase phase = RitualPhase::Idle;
    std::optional<SessionView> session;
    std::optional<std::string> last_session_id;
    LightPattern light;
};

// The portal's session state machine. Every command is queued to one
// worker thread, which is the only writer of ritual state; producers
// (HTTP handlers, the REPL, the audio frontend) may submit from any
// thread. Listeners are invoked on the worker thread and must not block.
class RitualEngine {
public:
    RitualEngine(EngineDeps deps, EngineSettings settings);
    ~RitualEngine();
    RitualEngine(const RitualEngine&) = delete;
    RitualEngine& operator=(const RitualEngine&) = delete;

    std::future<CommandResult> submit_awaken(std::optional<VisionRequest> image = std::nullopt);
    std::future<CommandResult> submit_utterance(std::string text);
    std::future<CommandResult> submit_goodbye();

    CommandResult awaken(std::optional<VisionRequest> image = std::nullopt) {
        return submit_awaken(std::move(image)).get();
    }
    CommandResult utterance(std::string text) { return submit_utterance(std::move(text)).get(); }
    CommandResult goodbye() { return submit_goodbye().get(); }

    EngineSnapshot snapshot() const;
    const EngineSettings& settings() const { return settings_; }

    int add_listener(EventListener listener);
    void remove_listener(int id);

    void shutdown();

private:
    struct Session {
        std::string session_id;
        std::optional<ObjectProfile> object;
        bool was_new = false;
        Timestamp started_at;
        std::vector<TranscriptEntry> transcript;
        std::vector<InnerThoughtsEntry> inner_thoughts;
    };

    std::future<CommandResult> post(std::function<CommandResult()> fn);
    void loop();

    CommandResult do_awaken(std::optional<VisionRequest> image);
    CommandResult do_utterance(const std::string& text);
    CommandResult do_goodbye();

    RitualEvent run_request_phase(std::optional<VisionRequest> image, CommandResult& result);
    RitualEvent run_conversation_turn(const std::string& human_text, CommandResult& result);
    RitualEvent run_transformation_phase(CommandResult& result, SessionLog& log);

    void apply(const RitualEvent& event);
    void append(TranscriptEntry entry, CommandResult& result);
    void emit(ApiEventKind kind, nlohmann::json payload, bool operator_only = false);
    void speak(const std::string& text);
    void end_session(bool aborted, const std::string& reason, const std::optional<std::string>& summary_ref,
                     bool summary_skipped);
    CommandResult status(CommandResult::Code code, std::string error = {}) const;

    EngineDeps deps_;
    EngineSettings settings_;

    mutable std::mutex state_mutex_;
    RitualPhase phase_ = RitualPhase::Idle;
    std::optional<Session> session_;
    std::optional<std::string> last_session_id_;

    std::mutex listeners_mutex_;
    std::map<int, EventListener> listeners_;
    int next_listener_ = 1;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::packaged_task<CommandResult()>> queue_;
    bool stopping_ = false;
    std::thread worker_;
};

// Feeds microphone clips through transcription into the engine until the
// source closes. Blank transcripts are dropped; transcription failures
// are logged and skipped. Returns the number of utterances submitted.
std::size_t run_listen_loop(MicrophoneSource& mic, TranscriptionProvider& stt, RitualEngine& engine);

}  // namespace portal
