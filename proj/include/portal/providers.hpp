#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "portal/codec.hpp"
#include "portal/embedding.hpp"

namespace portal {

inline constexpr std::string_view kDefaultSpeechEngine = "eleven_turbo_v2_5";

enum class ProviderErrorKind { Timeout, AuthFailure, RateLimited, MalformedResponse, Unavailable };

std::string_view to_string(ProviderErrorKind kind);

class ProviderError : public std::runtime_error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& detail);

    ProviderErrorKind kind() const { return kind_; }
    const std::string& detail() const { return detail_; }
    // Transient failures worth another attempt.
    bool retryable() const {
        return kind_ == ProviderErrorKind::Timeout || kind_ == ProviderErrorKind::RateLimited ||
               kind_ == ProviderErrorKind::Unavailable;
    }

private:
    ProviderErrorKind kind_;
    std::string detail_;
};

struct VisionRequest {
    Bytes image_bytes;
    std::string mime_type = "image/jpeg";

    void validate() const;  // throws std::invalid_argument
};

// Guesses image/png vs image/jpeg from the file extension.
VisionRequest vision_request_from_file(const std::string& path);

enum class Role { System, User, Assistant };
std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string text;
    bool operator==(const ChatMessage&) const = default;
};

enum class ResponseSchema { FreeText, PersonaSheet, TwoTierTurn };
std::string_view to_string(ResponseSchema schema);

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatMessage> messages;
    ResponseSchema schema = ResponseSchema::FreeText;

    void validate() const;
    bool operator==(const ChatRequest&) const = default;
};

struct SpeechRequest {
    std::string text;
    std::string voice_id;
    std::string engine_tag = std::string(kDefaultSpeechEngine);

    void validate() const;
};

struct SpeechAudio {
    Bytes audio;  // WAV container
    std::int64_t duration_ms = 0;
};

// The five external capabilities. Public entry points validate the
// request, then dispatch to the implementation; an invalid request
// never reaches a backend.
class VisionProvider {
public:
    virtual ~VisionProvider() = default;
    std::string describe_image(const VisionRequest& req);

protected:
    virtual std::string do_describe_image(const VisionRequest& req) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    Embedding embed_image(const VisionRequest& req);
    Embedding embed_text(std::string_view text);
    virtual std::size_t dimensions() const = 0;

protected:
    virtual Embedding do_embed_image(const VisionRequest& req) = 0;
    virtual Embedding do_embed_text(std::string_view text) = 0;

private:
    Embedding checked(Embedding e) const;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    std::string chat(const ChatRequest& req);

protected:
    virtual std::string do_chat(const ChatRequest& req) = 0;
};

class SpeechProvider {
public:
    virtual ~SpeechProvider() = default;
    SpeechAudio synthesize_speech(const SpeechRequest& req);

protected:
    virtual SpeechAudio do_synthesize_speech(const SpeechRequest& req) = 0;
};

class TranscriptionProvider {
public:
    virtual ~TranscriptionProvider() = default;
    std::string transcribe(std::span<const std::uint8_t> audio);

protected:
    virtual std::string do_transcribe(std::span<const std::uint8_t> audio) = 0;
};

struct ProviderSet {
    std::shared_ptr<VisionProvider> vision;
    std::shared_ptr<EmbeddingProvider> embedding;
    std::shared_ptr<ChatProvider> chat;
    std::shared_ptr<SpeechProvider> speech;
    std::shared_ptr<TranscriptionProvider> transcription;

    bool complete() const { return vision && embedding && chat && speech && transcription; }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryPolicy {
    int max_retries = 3;
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500),
                                                   std::chrono::seconds(2), std::chrono::seconds(8)};

    // Delay before retry number `attempt` (1-based); the last entry
    // repeats if max_retries exceeds the schedule.
    std::chrono::milliseconds delay_before(int attempt) const;
};

Sleeper real_sleeper();

// Runs `call`, retrying retryable ProviderErrors up to policy.max_retries
// times. Non-retryable errors propagate on first occurrence.
template <typename F>
auto with_retry(const RetryPolicy& policy, const Sleeper& sleep, F&& call) -> decltype(call()) {
    for (int attempt = 0;; ++attempt) {
        try {
            return call();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_retries) throw;
            sleep(policy.delay_before(attempt + 1));
        }
    }
}

// Wraps every provider in the set with the retry policy.
ProviderSet with_retries(const ProviderSet& inner, RetryPolicy policy, Sleeper sleep);

}  // namespace portal
