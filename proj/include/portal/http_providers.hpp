#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "portal/providers.hpp"

// HTTP-backed providers for capability-equivalent hosted services
// (OpenAI-style chat/vision/embeddings/transcription, ElevenLabs-style TTS).
namespace portal::http {

struct HttpRequest {
    std::string method = "POST";
    std::string path;  // includes query string
    std::string content_type = "application/json";
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
    int status = 0;
    std::string content_type;
    std::string body;
};

// Transport failures (connect, deadline) surface as ProviderError.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse send(const HttpRequest& req) = 0;
};

class HttplibTransport final : public HttpTransport {
public:
    // base_url like "https://api.openai.com" or "http://127.0.0.1:9000".
    HttplibTransport(std::string base_url, std::chrono::milliseconds deadline = std::chrono::seconds(30));
    HttpResponse send(const HttpRequest& req) override;

private:
    std::string base_url_;
    std::chrono::milliseconds deadline_;
};

// Replay fixtures: one file per request, named by fixture_key(). Auth
// headers are not part of the key.
std::string fixture_key(const HttpRequest& req);

class RecordingTransport final : public HttpTransport {
public:
    RecordingTransport(std::shared_ptr<HttpTransport> inner, std::string dir);
    HttpResponse send(const HttpRequest& req) override;

private:
    std::shared_ptr<HttpTransport> inner_;
    std::string dir_;
};

class ReplayTransport final : public HttpTransport {
public:
    explicit ReplayTransport(std::string dir) : dir_(std::move(dir)) {}
    HttpResponse send(const HttpRequest& req) override;  // missing fixture -> Unavailable

private:
    std::string dir_;
};

// Maps a non-2xx status to the matching ProviderError.
[[noreturn]] void throw_for_status(const HttpResponse& resp);

struct Endpoint {
    std::shared_ptr<HttpTransport> transport;
    std::string api_key;
    std::string model;
};

class HttpVision final : public VisionProvider {
public:
    explicit HttpVision(Endpoint ep) : ep_(std::move(ep)) {}

protected:
    std::string do_describe_image(const VisionRequest& req) override;

private:
    Endpoint ep_;
};

class HttpChat final : public ChatProvider {
public:
    explicit HttpChat(Endpoint ep) : ep_(std::move(ep)) {}

protected:
    std::string do_chat(const ChatRequest& req) override;

private:
    Endpoint ep_;
};

class HttpEmbedding final : public EmbeddingProvider {
public:
    HttpEmbedding(Endpoint ep, std::size_t dim) : ep_(std::move(ep)), dim_(dim) {}
    std::size_t dimensions() const override { return dim_; }

protected:
    Embedding do_embed_image(const VisionRequest& req) override;
    Embedding do_embed_text(std::string_view text) override;

private:
    Embedding post(const std::string& body);
    Endpoint ep_;
    std::size_t dim_;
};

class HttpSpeech final : public SpeechProvider {
public:
    explicit HttpSpeech(Endpoint ep) : ep_(std::move(ep)) {}

protected:
    SpeechAudio do_synthesize_speech(const SpeechRequest& req) override;

private:
    Endpoint ep_;
};

class HttpTranscription final : public TranscriptionProvider {
public:
    explicit HttpTranscription(Endpoint ep) : ep_(std::move(ep)) {}

protected:
    std::string do_transcribe(std::span<const std::uint8_t> audio) override;

private:
    Endpoint ep_;
};

// Wraps raw PCM16 mono samples in a WAV header.
Bytes wrap_pcm16_wav(std::span<const std::uint8_t> pcm, int sample_rate);

}  // namespace portal::http
