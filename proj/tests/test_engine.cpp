#include <doctest.h>

#include <algorithm>
#include <mutex>

#include "support.hpp"

using namespace portal;
using namespace portal::test;
using Mode = LightPattern::Mode;

namespace {

struct Rig {
    TempDir dir;
    mock::MockSet mocks;
    std::shared_ptr<RecordingAudioSink> audio = std::make_shared<RecordingAudioSink>();
    std::unique_ptr<PortalApp> app;
    std::mutex mutex;
    std::vector<EngineEvent> events;

    explicit Rig(std::shared_ptr<Camera> camera = nullptr) {
        quiet_logs();
        AppOverrides o;
        o.providers = mocks.providers();
        o.audio = audio;
        o.camera = std::move(camera);
        app = std::make_unique<PortalApp>(test_config(dir.path()), std::move(o));
        app->engine().add_listener([this](const EngineEvent& e) {
            std::lock_guard lock(mutex);
            events.push_back(e);
        });
    }

    RitualEngine& engine() { return app->engine(); }

    std::vector<EngineEvent> of(ApiEventKind k) {
        std::lock_guard lock(mutex);
        std::vector<EngineEvent> out;
        for (const auto& e : events)
            if (e.kind == k) out.push_back(e);
        return out;
    }

    CommandResult awaken_fox(const std::string& name = "Quill") {
        mocks.chat->push(persona_sheet(name));
        return engine().awaken(app->resolve_image_ref("fox.png"));
    }
};

}  // namespace

TEST_CASE("awaken with an image binds a new object and enters conversation") {
    Rig r;
    const auto res = r.awaken_fox();
    REQUIRE(res.ok());
    CHECK(res.was_new);
    CHECK(res.phase == RitualPhase::Conversation);
    REQUIRE(res.object_id);
    CHECK(r.app->registry().contains(*res.object_id));
    const auto snap = r.engine().snapshot();
    REQUIRE(snap.session);
    CHECK(snap.session->object->persona.name == "Quill");
    const auto bound = r.of(ApiEventKind::ObjectBound);
    REQUIRE(bound.size() == 1);
    CHECK(bound[0].payload["was_new"] == true);
    CHECK(bound[0].payload["similarity"].is_null());
}

TEST_CASE("awaken without a camera aborts back to idle") {
    Rig r;
    const auto res = r.engine().awaken();
    CHECK(res.code == CommandResult::Code::Failed);
    CHECK(res.phase == RitualPhase::Idle);
    CHECK(res.error.find("camera") != std::string::npos);
    const auto phases = r.of(ApiEventKind::PhaseChanged);
    REQUIRE(phases.size() == 2);
    CHECK(phases[0].payload["to"] == "Request");
    CHECK(phases[1].payload["to"] == "Idle");
    const auto closed = r.of(ApiEventKind::SessionClosed);
    REQUIRE(closed.size() == 1);
    CHECK(closed[0].payload["aborted"] == true);
    CHECK(r.engine().snapshot().phase == RitualPhase::Idle);
    CHECK(r.app->store().list_sessions().empty());
}

TEST_CASE("a configured fixture camera serves the awaken keyword") {
    Rig r(std::make_shared<FixtureCamera>(fixture("teapot.png").string()));
    r.mocks.chat->push(persona_sheet("Spout"));
    const auto res = r.engine().utterance("Awaken!");
    REQUIRE(res.ok());
    CHECK(res.phase == RitualPhase::Conversation);
}

TEST_CASE("light follows the phases") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push(turn_text("glad", 0.8, true, "Hello there."));
    r.engine().utterance("hello");
    r.mocks.chat->push("We said hello.");
    r.engine().goodbye();
    const auto log = r.app->light().command_log();
    std::vector<Mode> modes;
    for (const auto& c : log) modes.push_back(c.pattern.mode);
    CHECK(modes == std::vector<Mode>{Mode::Off, Mode::SteadyBright, Mode::Breathing, Mode::Off, Mode::Off});
    const auto& breathing = log[2].pattern;
    CHECK(breathing.b_min == doctest::Approx(0.15));
    CHECK(breathing.b_max == doctest::Approx(0.9));
    CHECK(breathing.period_s == doctest::Approx(4.0));
}

TEST_CASE("a spoken turn appends human then object entries and plays audio") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push(turn_text("a visitor", 0.7, true, "Welcome, traveller."));
    const auto res = r.engine().utterance("hello");
    REQUIRE(res.ok());
    REQUIRE(res.reply);
    CHECK(*res.reply == "Welcome, traveller.");
    REQUIRE(res.appended.size() == 2);
    CHECK(res.appended[0].speaker == Speaker::Human);
    CHECK(res.appended[1].speaker == Speaker::Object);
    CHECK(res.appended[1].kind == EntryKind::Utterance);
    const auto speech = r.mocks.speech->requests();
    REQUIRE(speech.size() == 1);
    CHECK(speech[0].text == "Welcome, traveller.");
    CHECK(speech[0].voice_id == "warm");
    CHECK(r.audio->played().size() == 1);
}

TEST_CASE("a silent turn records silence and makes no speech call") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push(turn_text("not now", 0.1, false, ""));
    const auto res = r.engine().utterance("are you there?");
    REQUIRE(res.ok());
    CHECK(res.silent);
    CHECK_FALSE(res.reply);
    REQUIRE(res.appended.size() == 2);
    CHECK(res.appended[1].kind == EntryKind::Silence);
    CHECK(r.mocks.speech->requests().empty());
    const auto snap = r.engine().snapshot();
    REQUIRE(snap.session->inner_thoughts.size() == 1);
    CHECK(snap.session->inner_thoughts[0].inner_thoughts == "not now");
    CHECK_FALSE(snap.session->inner_thoughts[0].speak);
}

TEST_CASE("a provider failure apologises and keeps the conversation going") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push_error(ProviderErrorKind::Unavailable);
    const auto res = r.engine().utterance("hello");
    CHECK(res.code == CommandResult::Code::Failed);
    CHECK(res.phase == RitualPhase::Conversation);
    REQUIRE(res.appended.size() == 2);
    CHECK(res.appended[1].speaker == Speaker::Portal);
    CHECK(res.appended[1].kind == EntryKind::Apology);
    r.mocks.chat->push(turn_text("better", 0.9, true, "I am back."));
    CHECK(r.engine().utterance("hello again").ok());
}

TEST_CASE("malformed model output is retried once before apologising") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push("no markers at all");
    r.mocks.chat->push(turn_text("fixed", 0.6, true, "There we are."));
    const auto res = r.engine().utterance("hello");
    REQUIRE(res.ok());
    CHECK(*res.reply == "There we are.");
}

TEST_CASE("goodbye after three turns writes a session log and a summary") {
    Rig r;
    const auto awake = r.awaken_fox();
    for (int i = 0; i < 3; ++i) {
        r.mocks.chat->push(turn_text("t" + std::to_string(i), 0.7, true, "Reply " + std::to_string(i)));
        REQUIRE(r.engine().utterance("line " + std::to_string(i)).ok());
    }
    r.mocks.chat->push("We talked of three things.");
    const auto res = r.engine().goodbye();
    REQUIRE(res.ok());
    CHECK(res.phase == RitualPhase::Idle);

    const auto sessions = r.app->store().list_sessions();
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0] == *awake.session_id);
    const SessionLog log = r.app->store().read_session_log(sessions[0]);
    CHECK(log.object_id == *awake.object_id);
    CHECK(log.was_new);
    REQUIRE(log.summary_ref);
    CHECK_FALSE(log.summary_skipped);
    CHECK(log.inner_thoughts.size() == 3);
    // 3 x (human, object) plus the portal reflection
    REQUIRE(log.transcript.size() == 7);
    CHECK(log.transcript.back().speaker == Speaker::Portal);
    for (std::size_t i = 1; i < log.transcript.size(); ++i) CHECK(log.transcript[i - 1].ts < log.transcript[i].ts);

    const auto history = r.app->memory().retrieve_history(*awake.object_id, 1);
    REQUIRE(history.size() == 1);
    CHECK(history[0].memory_id == *log.summary_ref);
    CHECK(history[0].text.rfind("[summary] ", 0) == 0);
    const auto closed = r.of(ApiEventKind::SessionClosed);
    REQUIRE(closed.size() == 1);
    CHECK(closed[0].payload["summary_ref"] == *log.summary_ref);
}

TEST_CASE("immediate goodbye skips the summary call but still reflects aloud") {
    Rig r;
    r.awaken_fox();
    const int before = r.mocks.chat->calls();
    const auto res = r.engine().goodbye();
    REQUIRE(res.ok());
    CHECK(r.mocks.chat->calls() == before);
    const SessionLog log = r.app->store().read_session_log(r.app->store().list_sessions().at(0));
    CHECK_FALSE(log.summary_ref);
    CHECK_FALSE(log.summary_skipped);
    REQUIRE(log.transcript.size() == 1);
    CHECK(log.transcript[0].speaker == Speaker::Portal);
    CHECK(log.transcript[0].text.find("Quill") != std::string::npos);
    REQUIRE(r.mocks.speech->requests().size() == 1);
}

TEST_CASE("a failed summary is marked skipped and the session still closes") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push(turn_text("x", 0.5, true, "Yes."));
    r.engine().utterance("hi");
    r.mocks.chat->push_error(ProviderErrorKind::Timeout);
    const auto res = r.engine().goodbye();
    REQUIRE(res.ok());
    const SessionLog log = r.app->store().read_session_log(r.app->store().list_sessions().at(0));
    CHECK(log.summary_skipped);
    CHECK_FALSE(log.summary_ref);
    CHECK(r.engine().snapshot().phase == RitualPhase::Idle);
}

TEST_CASE("commands outside their phase are rejected without moving state") {
    Rig r;
    CHECK(r.engine().utterance("hello").code == CommandResult::Code::NoSession);
    CHECK(r.engine().goodbye().code == CommandResult::Code::NoSession);
    CHECK(r.engine().utterance("   ").code == CommandResult::Code::BadRequest);
    const auto first = r.awaken_fox();
    const auto again = r.engine().awaken(r.app->resolve_image_ref("teapot.png"));
    CHECK(again.code == CommandResult::Code::SessionActive);
    CHECK(again.session_id == first.session_id);
    CHECK(r.engine().utterance("awaken").code == CommandResult::Code::SessionActive);
    CHECK(r.engine().snapshot().phase == RitualPhase::Conversation);
    CHECK(r.of(ApiEventKind::PhaseChanged).size() == 2);
}

TEST_CASE("the goodbye keyword ends the session and triggers are not transcribed") {
    Rig r;
    r.awaken_fox();
    const auto res = r.engine().utterance("Goodbye, fox");
    REQUIRE(res.ok());
    CHECK(res.phase == RitualPhase::Idle);
    const SessionLog log = r.app->store().read_session_log(r.app->store().list_sessions().at(0));
    for (const auto& e : log.transcript) CHECK(e.speaker != Speaker::Human);
}

TEST_CASE("each session gets a fresh id and the object is recognised again") {
    Rig r;
    const auto a = r.awaken_fox();
    r.engine().goodbye();
    const auto b = r.engine().awaken(r.app->resolve_image_ref("fox.png"));
    REQUIRE(b.ok());
    CHECK_FALSE(b.was_new);
    CHECK(b.object_id == a.object_id);
    CHECK(b.session_id != a.session_id);
    CHECK(r.engine().snapshot().last_session_id == a.session_id);
    const auto bound = r.of(ApiEventKind::ObjectBound);
    REQUIRE(bound.size() == 2);
    CHECK(bound[1].payload["similarity"].get<double>() >= 0.85);
}

TEST_CASE("a returning object's prompt carries memories from earlier sessions only") {
    Rig r;
    r.awaken_fox();
    r.mocks.chat->push(turn_text("x", 0.5, true, "I like the river."));
    r.engine().utterance("tell me about the river");
    r.mocks.chat->push("We spoke of the river.");
    r.engine().goodbye();

    r.engine().awaken(r.app->resolve_image_ref("fox.png"));
    r.mocks.chat->push(turn_text("y", 0.5, true, "Yes, the river."));
    r.engine().utterance("remember the river?");
    const auto reqs = r.mocks.chat->requests();
    const std::string prompt = reqs.back().system_prompt;
    CHECK(prompt.find("We spoke of the river.") != std::string::npos);
    CHECK(reqs.back().messages.back().text == "remember the river?");
}

TEST_CASE("inner thoughts never reach the speech provider or participant events") {
    Rig r;
    r.awaken_fox();
    const std::string secret = "SECRET-INNER-MARKER";
    for (int i = 0; i < 5; ++i) {
        r.mocks.chat->push(turn_text(secret + std::to_string(i), 0.6, i % 2 == 0,
                                     i % 2 == 0 ? "Visible " + std::to_string(i) : ""));
        r.engine().utterance("turn " + std::to_string(i));
    }
    r.mocks.chat->push("summary");
    r.engine().goodbye();
    for (const auto& s : r.mocks.speech->requests()) CHECK(s.text.find(secret) == std::string::npos);
    std::lock_guard lock(r.mutex);
    int inner = 0;
    for (const auto& e : r.events) {
        if (e.kind == ApiEventKind::InnerThoughts) {
            CHECK(e.operator_only);
            ++inner;
        } else {
            CHECK_FALSE(e.operator_only);
            CHECK(e.payload.dump().find(secret) == std::string::npos);
        }
    }
    CHECK(inner == 5);
}

TEST_CASE("the listen loop transcribes fixture clips into utterances") {
    Rig r;
    r.awaken_fox();
    r.mocks.transcription->add_fixtures(PORTAL_FIXTURE_DIR, {{"hello.wav", "hello"}, {"silence.wav", ""},
                                                             {"goodbye.wav", "goodbye"}});
    r.mocks.chat->push(turn_text("x", 0.5, true, "Hi."));
    r.mocks.chat->push("summary");
    const auto wav = [](const std::string& n) { return to_bytes(read_text(fixture(n))); };
    FixtureMicrophone mic({wav("hello.wav"), wav("silence.wav"), wav("awaken.wav"), wav("goodbye.wav")});
    const std::size_t n = run_listen_loop(mic, *r.mocks.transcription, r.engine());
    CHECK(n == 2);  // silence is blank, the unknown clip fails
    CHECK(r.engine().snapshot().phase == RitualPhase::Idle);
    const SessionLog log = r.app->store().read_session_log(r.app->store().list_sessions().at(0));
    REQUIRE(log.transcript.size() >= 2);
    CHECK(log.transcript[0].text == "hello");
    for (std::size_t i = 1; i < log.transcript.size(); ++i) CHECK(log.transcript[i - 1].ts < log.transcript[i].ts);
}

TEST_CASE("commands from many threads are serialised") {
    Rig r;
    r.awaken_fox();
    for (int i = 0; i < 20; ++i) r.mocks.chat->push(turn_text("x", 0.5, true, "ok"));
    std::vector<std::future<CommandResult>> fs;
    for (int i = 0; i < 20; ++i) fs.push_back(r.engine().submit_utterance("u" + std::to_string(i)));
    for (auto& f : fs) CHECK(f.get().ok());
    const auto snap = r.engine().snapshot();
    CHECK(snap.session->transcript.size() == 40);
    for (std::size_t i = 0; i < 40; i += 2) {
        CHECK(snap.session->transcript[i].speaker == Speaker::Human);
        CHECK(snap.session->transcript[i + 1].speaker == Speaker::Object);
    }
}
