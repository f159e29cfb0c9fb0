#include "portal/engine.hpp"

#include <spdlog/spdlog.h>

namespace portal {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

constexpr std::string_view kApology = "(the object could not answer just now)";

}  // namespace

std::string_view to_string(ApiEventKind k) {
    switch (k) {
        case ApiEventKind::PhaseChanged: return "PhaseChanged";
        case ApiEventKind::TranscriptAppended: return "TranscriptAppended";
        case ApiEventKind::InnerThoughts: return "InnerThoughts";
        case ApiEventKind::LightSample: return "LightSample";
        case ApiEventKind::ObjectBound: return "ObjectBound";
        case ApiEventKind::SessionClosed: return "SessionClosed";
    }
    return "PhaseChanged";
}

RitualEngine::RitualEngine(EngineDeps deps, EngineSettings settings)
    : deps_(std::move(deps)), settings_(std::move(settings)) {
    if (!deps_.providers.complete()) throw std::invalid_argument("ritual engine: provider set incomplete");
    settings_.request_light.validate();
    settings_.conversation_light.validate();
    if (settings_.transcript_tail > PromptContext::kMaxTranscriptTail)
        throw std::invalid_argument("ritual engine: transcript tail above 12");
    deps_.light.set(LightPattern::off());
    worker_ = std::thread([this] { loop(); });
}

RitualEngine::~RitualEngine() { shutdown(); }

void RitualEngine::shutdown() {
    {
        std::lock_guard lock(queue_mutex_);
        if (stopping_ && !worker_.joinable()) return;
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

std::future<CommandResult> RitualEngine::post(std::function<CommandResult()> fn) {
    std::packaged_task<CommandResult()> task([this, fn = std::move(fn)] {
        try {
            return fn();
        } catch (const std::exception& e) {
            spdlog::error("engine command failed: {}", e.what());
            return status(CommandResult::Code::Failed, e.what());
        }
    });
    auto fut = task.get_future();
    {
        std::lock_guard lock(queue_mutex_);
        if (stopping_) {
            std::promise<CommandResult> p;
            CommandResult r;
            r.code = CommandResult::Code::Failed;
            r.error = "engine stopped";
            p.set_value(r);
            return p.get_future();
        }
        queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
    return fut;
}

void RitualEngine::loop() {
    for (;;) {
        std::packaged_task<CommandResult()> task;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

std::future<CommandResult> RitualEngine::submit_awaken(std::optional<VisionRequest> image) {
    return post([this, image = std::move(image)]() mutable { return do_awaken(std::move(image)); });
}

std::future<CommandResult> RitualEngine::submit_utterance(std::string text) {
    return post([this, text = std::move(text)] { return do_utterance(text); });
}

std::future<CommandResult> RitualEngine::submit_goodbye() {
    return post([this] { return do_goodbye(); });
}

int RitualEngine::add_listener(EventListener listener) {
    std::lock_guard lock(listeners_mutex_);
    const int id = next_listener_++;
    listeners_.emplace(id, std::move(listener));
    return id;
}

void RitualEngine::remove_listener(int id) {
    std::lock_guard lock(listeners_mutex_);
    listeners_.erase(id);
}

EngineSnapshot RitualEngine::snapshot() const {
    EngineSnapshot s;
    s.light = deps_.light.pattern();
    std::lock_guard lock(state_mutex_);
    s.phase = phase_;
    s.last_session_id = last_session_id_;
    if (session_) {
        s.session = SessionView{session_->session_id, session_->object,     session_->was_new,
                                session_->started_at, session_->transcript, session_->inner_thoughts};
    }
    return s;
}

CommandResult RitualEngine::status(CommandResult::Code code, std::string error) const {
    CommandResult r;
    r.code = code;
    r.error = std::move(error);
    std::lock_guard lock(state_mutex_);
    r.phase = phase_;
    if (session_) {
        r.session_id = session_->session_id;
        if (session_->object) r.object_id = session_->object->object_id;
    }
    return r;
}

void RitualEngine::emit(ApiEventKind kind, json payload, bool operator_only) {
    EngineEvent ev{kind, std::move(payload), deps_.clock.now(), operator_only};
    std::vector<EventListener> targets;
    {
        std::lock_guard lock(listeners_mutex_);
        for (const auto& [id, l] : listeners_) targets.push_back(l);
    }
    for (const auto& l : targets) {
        try {
            l(ev);
        } catch (const std::exception& e) {
            spdlog::warn("event listener threw: {}", e.what());
        }
    }
}

void RitualEngine::apply(const RitualEvent& event) {
    RitualPhase from, to;
    std::string session_id;
    {
        std::lock_guard lock(state_mutex_);
        from = phase_;
        to = transition(from, event);
        phase_ = to;
        if (session_) session_id = session_->session_id;
    }
    if (to == from) return;
    switch (to) {
        case RitualPhase::Request: deps_.light.set(settings_.request_light); break;
        case RitualPhase::Conversation: deps_.light.set(settings_.conversation_light); break;
        case RitualPhase::Transformation:
        case RitualPhase::Idle: deps_.light.set(LightPattern::off()); break;
    }
    emit(ApiEventKind::PhaseChanged,
         {{"from", to_string(from)}, {"to", to_string(to)}, {"session_id", session_id}});
}

void RitualEngine::append(TranscriptEntry entry, CommandResult& result) {
    std::size_t index = 0;
    std::string session_id;
    {
        std::lock_guard lock(state_mutex_);
        auto& t = session_->transcript;
        if (!t.empty() && entry.ts <= t.back().ts) entry.ts = t.back().ts.plus(std::chrono::microseconds(1));
        t.push_back(entry);
        index = t.size() - 1;
        session_id = session_->session_id;
    }
    result.appended.push_back(entry);
    emit(ApiEventKind::TranscriptAppended, {{"session_id", session_id},
                                            {"index", index},
                                            {"speaker", to_string(entry.speaker)},
                                            {"kind", to_string(entry.kind)},
                                            {"text", entry.text},
                                            {"ts", to_iso8601(entry.ts)}});
}

void RitualEngine::speak(const std::string& text) {
    std::string voice;
    {
        std::lock_guard lock(state_mutex_);
        if (session_ && session_->object) voice = session_->object->persona.voice_id;
    }
    if (voice.empty() && !settings_.voices.empty()) voice = settings_.voices.front();
    try {
        deps_.audio.play(deps_.providers.speech->synthesize_speech({text, voice}));
    } catch (const std::exception& e) {
        spdlog::warn("speech synthesis failed, reply stays text-only: {}", e.what());
    }
}

void RitualEngine::end_session(bool aborted, const std::string& reason, const std::optional<std::string>& summary_ref,
                               bool summary_skipped) {
    json payload;
    {
        std::lock_guard lock(state_mutex_);
        if (!session_) return;
        payload = {{"session_id", session_->session_id},
                   {"object_id", session_->object ? json(session_->object->object_id) : json(nullptr)},
                   {"aborted", aborted},
                   {"reason", reason},
                   {"summary_ref", summary_ref ? json(*summary_ref) : json(nullptr)},
                   {"summary_skipped", summary_skipped},
                   {"transcript_entries", session_->transcript.size()}};
        last_session_id_ = session_->session_id;
        session_.reset();
    }
    emit(ApiEventKind::SessionClosed, std::move(payload));
}

CommandResult RitualEngine::do_awaken(std::optional<VisionRequest> image) {
    {
        std::lock_guard lock(state_mutex_);
        if (phase_ != RitualPhase::Idle) {
            CommandResult r;
            r.code = CommandResult::Code::SessionActive;
            r.error = "a session is already active";
            r.phase = phase_;
            if (session_) r.session_id = session_->session_id;
            return r;
        }
        Session s;
        s.session_id = deps_.ids.next();
        s.started_at = deps_.clock.now();
        session_ = std::move(s);
    }
    apply(RitualEvent::of(RitualEventKind::KeywordAwaken));

    CommandResult result;
    const RitualEvent outcome = run_request_phase(std::move(image), result);
    apply(outcome);
    if (outcome.kind == RitualEventKind::Error) {
        const std::string sid = *status(CommandResult::Code::Ok).session_id;
        end_session(true, outcome.text, std::nullopt, false);
        result.code = CommandResult::Code::Failed;
        result.error = outcome.text;
        result.session_id = sid;
        result.phase = RitualPhase::Idle;
        return result;
    }
    const CommandResult now = status(CommandResult::Code::Ok);
    result.phase = now.phase;
    result.session_id = now.session_id;
    result.object_id = now.object_id;
    return result;
}

RitualEvent RitualEngine::run_request_phase(std::optional<VisionRequest> image, CommandResult& result) {
    try {
        VisionRequest req = image ? std::move(*image) : deps_.camera.capture();
        IdentityContext ctx{deps_.providers, deps_.registry, deps_.store,     deps_.clock,
                            deps_.ids,       deps_.templates, settings_.voices, settings_.threshold};
        Resolution res = resolve_identity(req, ctx);
        std::string session_id;
        {
            std::lock_guard lock(state_mutex_);
            session_->object = res.profile;
            session_->was_new = res.was_new;
            session_id = session_->session_id;
        }
        result.was_new = res.was_new;
        result.object_id = res.profile.object_id;
        const Persona& p = res.profile.persona;
        emit(ApiEventKind::ObjectBound,
             {{"session_id", session_id},
              {"object_id", res.profile.object_id},
              {"was_new", res.was_new},
              {"similarity", res.similarity ? json(*res.similarity) : json(nullptr)},
              {"description", res.profile.description},
              {"name", p.name},
              {"traits", p.traits},
              {"speaking_style", p.speaking_style}});
        return RitualEvent::of(RitualEventKind::IdentityResolved);
    } catch (const std::exception& e) {
        spdlog::error("request phase aborted: {}", e.what());
        return RitualEvent::error(e.what());
    }
}

CommandResult RitualEngine::do_utterance(const std::string& raw) {
    const std::string text = trim(raw);
    if (text.empty()) return status(CommandResult::Code::BadRequest, "empty utterance");
    const auto trigger = detect_keyword(text, settings_.keywords);

    RitualPhase phase;
    {
        std::lock_guard lock(state_mutex_);
        phase = phase_;
    }
    if (phase == RitualPhase::Idle) {
        if (trigger == Trigger::Awaken) return do_awaken(std::nullopt);
        return status(CommandResult::Code::NoSession, "no active session");
    }
    if (phase != RitualPhase::Conversation) return status(CommandResult::Code::Failed, "portal is busy");
    if (trigger == Trigger::Goodbye) return do_goodbye();
    if (trigger == Trigger::Awaken) return status(CommandResult::Code::SessionActive, "a session is already active");

    CommandResult result;
    const RitualEvent outcome = run_conversation_turn(text, result);
    apply(outcome);
    const CommandResult now = status(CommandResult::Code::Ok);
    result.phase = now.phase;
    result.session_id = now.session_id;
    result.object_id = now.object_id;
    return result;
}

RitualEvent RitualEngine::run_conversation_turn(const std::string& human_text, CommandResult& result) {
    ObjectProfile object;
    std::string session_id;
    std::vector<TranscriptEntry> prior;
    {
        std::lock_guard lock(state_mutex_);
        object = *session_->object;
        session_id = session_->session_id;
        prior = session_->transcript;
    }
    append({Speaker::Human, EntryKind::Utterance, human_text, deps_.clock.now()}, result);

    try {
        EmbeddingProvider& embedder = *deps_.providers.embedding;
        deps_.memory.store_memory(object.object_id, session_id, Speaker::Human, human_text, embedder);

        PromptContext ctx;
        ctx.persona = object.persona;
        if (settings_.history_count > 0)
            ctx.history_window = deps_.memory.retrieve_history(object.object_id, settings_.history_count, session_id);
        if (settings_.relevant_count > 0)
            ctx.relevant_memories = deps_.memory.retrieve_relevant(object.object_id, human_text,
                                                                   settings_.relevant_count, embedder, session_id);
        const std::size_t tail = std::min(prior.size(), settings_.transcript_tail);
        ctx.transcript_tail.assign(prior.end() - static_cast<std::ptrdiff_t>(tail), prior.end());
        ctx.human_utterance = human_text;

        const TwoTierTurn turn = generate_turn(ctx, *deps_.providers.chat, deps_.templates);

        InnerThoughtsEntry thoughts{deps_.clock.now(), turn.inner_thoughts, turn.engagement_intent, turn.speak};
        std::size_t turn_index = 0;
        {
            std::lock_guard lock(state_mutex_);
            session_->inner_thoughts.push_back(thoughts);
            turn_index = session_->inner_thoughts.size() - 1;
        }
        emit(ApiEventKind::InnerThoughts,
             {{"session_id", session_id},
              {"turn", turn_index},
              {"inner_thoughts", turn.inner_thoughts},
              {"engagement_intent", turn.engagement_intent},
              {"speak", turn.speak}},
             true);

        if (turn.speak) {
            deps_.memory.store_memory(object.object_id, session_id, Speaker::Object, turn.public_response, embedder);
            speak(turn.public_response);
            append({Speaker::Object, EntryKind::Utterance, turn.public_response, deps_.clock.now()}, result);
            result.reply = turn.public_response;
        } else {
            append({Speaker::Object, EntryKind::Silence, "", deps_.clock.now()}, result);
            result.silent = true;
        }
    } catch (const std::exception& e) {
        spdlog::warn("turn skipped: {}", e.what());
        append({Speaker::Portal, EntryKind::Apology, std::string(kApology), deps_.clock.now()}, result);
        result.code = CommandResult::Code::Failed;
        result.error = e.what();
    }
    return RitualEvent::of(RitualEventKind::TurnCompleted);
}

CommandResult RitualEngine::do_goodbye() {
    RitualPhase phase;
    {
        std::lock_guard lock(state_mutex_);
        phase = phase_;
    }
    if (phase == RitualPhase::Idle) return status(CommandResult::Code::NoSession, "no active session");
    if (phase != RitualPhase::Conversation) return status(CommandResult::Code::Failed, "portal is busy");

    apply(RitualEvent::of(RitualEventKind::KeywordGoodbye));
    CommandResult result;
    const CommandResult before = status(CommandResult::Code::Ok);
    result.session_id = before.session_id;
    result.object_id = before.object_id;
    SessionLog log;
    const RitualEvent outcome = run_transformation_phase(result, log);
    apply(outcome);
    end_session(outcome.kind == RitualEventKind::Error, outcome.text, log.summary_ref, log.summary_skipped);
    if (outcome.kind == RitualEventKind::Error) {
        result.code = CommandResult::Code::Failed;
        result.error = outcome.text;
    }
    result.phase = status(CommandResult::Code::Ok).phase;
    return result;
}

RitualEvent RitualEngine::run_transformation_phase(CommandResult& result, SessionLog& log) {
    std::string name;
    {
        std::lock_guard lock(state_mutex_);
        log.session_id = session_->session_id;
        log.object_id = session_->object->object_id;
        log.was_new = session_->was_new;
        log.started_at = session_->started_at;
        name = session_->object->persona.name;
    }

    if (!deps_.memory.session_records(log.object_id, log.session_id).empty()) {
        try {
            const MemoryRecord summary =
                deps_.memory.summarize_session(log.object_id, log.session_id, name, *deps_.providers.chat,
                                               *deps_.providers.embedding, deps_.templates);
            log.summary_ref = summary.memory_id;
        } catch (const std::exception& e) {
            spdlog::warn("session summary skipped: {}", e.what());
            log.summary_skipped = true;
        }
    }

    const std::string reflection = trim(render_template(deps_.templates.reflection, {{"name", name}}));
    if (!reflection.empty()) {
        append({Speaker::Portal, EntryKind::Utterance, reflection, deps_.clock.now()}, result);
        speak(reflection);
    }

    {
        std::lock_guard lock(state_mutex_);
        log.transcript = session_->transcript;
        log.inner_thoughts = session_->inner_thoughts;
    }
    log.ended_at = deps_.clock.now();
    try {
        deps_.store.write_session_log(log);
    } catch (const std::exception& e) {
        spdlog::error("could not persist session log: {}", e.what());
        return RitualEvent::error(e.what());
    }
    return RitualEvent::of(RitualEventKind::SummaryStored);
}

std::size_t run_listen_loop(MicrophoneSource& mic, TranscriptionProvider& stt, RitualEngine& engine) {
    std::size_t submitted = 0;
    while (auto clip = mic.next_clip()) {
        std::string text;
        try {
            text = trim(stt.transcribe(*clip));
        } catch (const std::exception& e) {
            spdlog::warn("transcription failed, clip dropped: {}", e.what());
            continue;
        }
        if (text.empty()) continue;
        engine.utterance(text);
        ++submitted;
    }
    return submitted;
}

}  // namespace portal
