#include "portal/providers.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace portal {

std::string_view to_string(ProviderErrorKind kind) {
    switch (kind) {
        case ProviderErrorKind::Timeout: return "Timeout";
        case ProviderErrorKind::AuthFailure: return "AuthFailure";
        case ProviderErrorKind::RateLimited: return "RateLimited";
        case ProviderErrorKind::MalformedResponse: return "MalformedResponse";
        case ProviderErrorKind::Unavailable: return "Unavailable";
    }
    return "Unknown";
}

ProviderError::ProviderError(ProviderErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

void VisionRequest::validate() const {
    if (image_bytes.empty()) throw std::invalid_argument("vision request: empty image");
    if (mime_type != "image/jpeg" && mime_type != "image/png")
        throw std::invalid_argument("vision request: unsupported mime type " + mime_type);
}

VisionRequest vision_request_from_file(const std::string& path) {
    VisionRequest req;
    req.image_bytes = read_file_bytes(path);
    std::string lower = path;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    req.mime_type = lower.ends_with(".png") ? "image/png" : "image/jpeg";
    return req;
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(ResponseSchema schema) {
    switch (schema) {
        case ResponseSchema::FreeText: return "FreeText";
        case ResponseSchema::PersonaSheet: return "PersonaSheet";
        case ResponseSchema::TwoTierTurn: return "TwoTierTurn";
    }
    return "FreeText";
}

void ChatRequest::validate() const {
    if (messages.empty()) throw std::invalid_argument("chat request: no messages");
    std::size_t i = 0;
    while (i < messages.size() && messages[i].role == Role::System) ++i;
    if (i == messages.size()) throw std::invalid_argument("chat request: only system messages");
    Role expected = Role::User;
    for (; i < messages.size(); ++i) {
        if (messages[i].role != expected)
            throw std::invalid_argument("chat request: roles must alternate user/assistant");
        expected = expected == Role::User ? Role::Assistant : Role::User;
    }
}

void SpeechRequest::validate() const {
    if (text.empty()) throw std::invalid_argument("speech request: empty text");
    if (voice_id.empty()) throw std::invalid_argument("speech request: empty voice id");
    if (engine_tag.empty()) throw std::invalid_argument("speech request: empty engine tag");
}

std::string VisionProvider::describe_image(const VisionRequest& req) {
    req.validate();
    std::string out = do_describe_image(req);
    if (out.empty()) throw ProviderError(ProviderErrorKind::MalformedResponse, "empty description");
    return out;
}

Embedding EmbeddingProvider::checked(Embedding e) const {
    if (e.dim() != dimensions())
        throw ProviderError(ProviderErrorKind::MalformedResponse,
                            "embedding has dim " + std::to_string(e.dim()) + ", expected " +
                                std::to_string(dimensions()));
    const double n = e.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw ProviderError(ProviderErrorKind::MalformedResponse, "zero or non-finite embedding");
    if (std::abs(n - 1.0) > 1e-6) return normalized(e.values);
    return e;
}

Embedding EmbeddingProvider::embed_image(const VisionRequest& req) {
    req.validate();
    return checked(do_embed_image(req));
}

Embedding EmbeddingProvider::embed_text(std::string_view text) {
    if (text.empty()) throw std::invalid_argument("embed_text: empty text");
    return checked(do_embed_text(text));
}

std::string ChatProvider::chat(const ChatRequest& req) {
    req.validate();
    std::string out = do_chat(req);
    if (out.empty()) throw ProviderError(ProviderErrorKind::MalformedResponse, "empty chat response");
    return out;
}

SpeechAudio SpeechProvider::synthesize_speech(const SpeechRequest& req) {
    req.validate();
    SpeechAudio out = do_synthesize_speech(req);
    if (out.audio.empty()) throw ProviderError(ProviderErrorKind::MalformedResponse, "empty audio");
    return out;
}

std::string TranscriptionProvider::transcribe(std::span<const std::uint8_t> audio) {
    if (audio.empty()) throw std::invalid_argument("transcribe: empty audio");
    return do_transcribe(audio);
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
    if (backoff.empty()) return std::chrono::milliseconds(0);
    const auto idx = static_cast<std::size_t>(std::clamp(attempt - 1, 0, static_cast<int>(backoff.size()) - 1));
    return backoff[idx];
}

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace {

class RetryingVision final : public VisionProvider {
public:
    RetryingVision(std::shared_ptr<VisionProvider> inner, RetryPolicy p, Sleeper s)
        : inner_(std::move(inner)), policy_(std::move(p)), sleep_(std::move(s)) {}

protected:
    std::string do_describe_image(const VisionRequest& req) override {
        return with_retry(policy_, sleep_, [&] { return inner_->describe_image(req); });
    }

private:
    std::shared_ptr<VisionProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingEmbedding final : public EmbeddingProvider {
public:
    RetryingEmbedding(std::shared_ptr<EmbeddingProvider> inner, RetryPolicy p, Sleeper s)
        : inner_(std::move(inner)), policy_(std::move(p)), sleep_(std::move(s)) {}
    std::size_t dimensions() const override { return inner_->dimensions(); }

protected:
    Embedding do_embed_image(const VisionRequest& req) override {
        return with_retry(policy_, sleep_, [&] { return inner_->embed_image(req); });
    }
    Embedding do_embed_text(std::string_view text) override {
        return with_retry(policy_, sleep_, [&] { return inner_->embed_text(text); });
    }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingChat final : public ChatProvider {
public:
    RetryingChat(std::shared_ptr<ChatProvider> inner, RetryPolicy p, Sleeper s)
        : inner_(std::move(inner)), policy_(std::move(p)), sleep_(std::move(s)) {}

protected:
    std::string do_chat(const ChatRequest& req) override {
        return with_retry(policy_, sleep_, [&] { return inner_->chat(req); });
    }

private:
    std::shared_ptr<ChatProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingSpeech final : public SpeechProvider {
public:
    RetryingSpeech(std::shared_ptr<SpeechProvider> inner, RetryPolicy p, Sleeper s)
        : inner_(std::move(inner)), policy_(std::move(p)), sleep_(std::move(s)) {}

protected:
    SpeechAudio do_synthesize_speech(const SpeechRequest& req) override {
        return with_retry(policy_, sleep_, [&] { return inner_->synthesize_speech(req); });
    }

private:
    std::shared_ptr<SpeechProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

class RetryingTranscription final : public TranscriptionProvider {
public:
    RetryingTranscription(std::shared_ptr<TranscriptionProvider> inner, RetryPolicy p, Sleeper s)
        : inner_(std::move(inner)), policy_(std::move(p)), sleep_(std::move(s)) {}

protected:
    std::string do_transcribe(std::span<const std::uint8_t> audio) override {
        return with_retry(policy_, sleep_, [&] { return inner_->transcribe(audio); });
    }

private:
    std::shared_ptr<TranscriptionProvider> inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

}  // namespace

ProviderSet with_retries(const ProviderSet& inner, RetryPolicy policy, Sleeper sleep) {
    ProviderSet out;
    if (inner.vision) out.vision = std::make_shared<RetryingVision>(inner.vision, policy, sleep);
    if (inner.embedding)
        out.embedding = std::make_shared<RetryingEmbedding>(inner.embedding, policy, sleep);
    if (inner.chat) out.chat = std::make_shared<RetryingChat>(inner.chat, policy, sleep);
    if (inner.speech) out.speech = std::make_shared<RetryingSpeech>(inner.speech, policy, sleep);
    if (inner.transcription)
        out.transcription = std::make_shared<RetryingTranscription>(inner.transcription, policy, sleep);
    return out;
}

}  // namespace portal
