#pragma once

#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "portal/providers.hpp"

// Deterministic offline providers. Every output is a pure function of the
// input bytes plus explicit script state.
namespace portal::mock {

// Short identifier derived from content: first 8 hex digits of SHA-256.
std::string hash_tag(std::span<const std::uint8_t> bytes);

// Hash-seeded pseudo-random unit vector. `domain` separates the image and
// text spaces so an image and a string with the same bytes do not collide.
Embedding seeded_unit_vector(std::string_view domain, std::span<const std::uint8_t> bytes,
                             std::size_t dim);

class MockVision final : public VisionProvider {
public:
    // Overrides keyed by the full SHA-256 hex of the image bytes.
    void set_tag(const std::string& sha256, std::string tag);
    void set_description(const std::string& sha256, std::string description);
    int calls() const;

protected:
    std::string do_describe_image(const VisionRequest& req) override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> tags_;
    std::map<std::string, std::string> descriptions_;
    int calls_ = 0;
};

class MockEmbedding final : public EmbeddingProvider {
public:
    explicit MockEmbedding(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}
    std::size_t dimensions() const override { return dim_; }

protected:
    Embedding do_embed_image(const VisionRequest& req) override;
    Embedding do_embed_text(std::string_view text) override;

private:
    std::size_t dim_;
};

// Replies from a FIFO script; an exhausted script is Unavailable.
// Entries may also be errors to exercise failure paths.
class ScriptedChat final : public ChatProvider {
public:
    ScriptedChat() = default;
    explicit ScriptedChat(std::vector<std::string> replies);

    void push(std::string reply);
    void push_error(ProviderErrorKind kind, std::string detail = "scripted failure");
    std::size_t remaining() const;
    std::vector<ChatRequest> requests() const;
    int calls() const;

protected:
    std::string do_chat(const ChatRequest& req) override;

private:
    struct Entry {
        std::string reply;
        bool is_error = false;
        ProviderErrorKind kind = ProviderErrorKind::Unavailable;
    };
    mutable std::mutex mutex_;
    std::deque<Entry> script_;
    std::vector<ChatRequest> requests_;
};

// Schema-aware deterministic responder for unscripted desk runs. Persona
// sheets and turns are derived from hashes of the request text.
class SyntheticChat final : public ChatProvider {
public:
    explicit SyntheticChat(std::vector<std::string> voices = {"warm"});

protected:
    std::string do_chat(const ChatRequest& req) override;

private:
    std::vector<std::string> voices_;
};

// WAV (16 kHz mono PCM16) of silence, 10 ms per character of text.
class MockSpeech final : public SpeechProvider {
public:
    static constexpr std::int64_t kMillisPerChar = 10;
    std::vector<SpeechRequest> requests() const;

protected:
    SpeechAudio do_synthesize_speech(const SpeechRequest& req) override;

private:
    mutable std::mutex mutex_;
    std::vector<SpeechRequest> requests_;
};

// Maps known audio clips (by content hash) to fixed transcripts.
class MockTranscription final : public TranscriptionProvider {
public:
    void add(std::span<const std::uint8_t> audio, std::string transcript);
    // Registers dir/<name> for every (name, transcript) pair.
    void add_fixtures(const std::string& dir, const std::map<std::string, std::string>& transcripts);

protected:
    std::string do_transcribe(std::span<const std::uint8_t> audio) override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> transcripts_;
};

Bytes make_wav_silence(std::int64_t duration_ms, int sample_rate = 16000);

// Full mock set with a scripted chat.
struct MockSet {
    std::shared_ptr<MockVision> vision = std::make_shared<MockVision>();
    std::shared_ptr<MockEmbedding> embedding = std::make_shared<MockEmbedding>();
    std::shared_ptr<ScriptedChat> chat = std::make_shared<ScriptedChat>();
    std::shared_ptr<MockSpeech> speech = std::make_shared<MockSpeech>();
    std::shared_ptr<MockTranscription> transcription = std::make_shared<MockTranscription>();

    ProviderSet providers() const { return {vision, embedding, chat, speech, transcription}; }
};

}  // namespace portal::mock
