#include "portal/http_providers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "portal/mock_providers.hpp"

namespace portal::http {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void add_auth(HttpRequest& req, const std::string& key) {
    if (key.empty()) throw ProviderError(ProviderErrorKind::AuthFailure, "no API key configured");
    req.headers.emplace_back("Authorization", "Bearer " + key);
}

json parse_json(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw ProviderError(ProviderErrorKind::MalformedResponse, std::string("invalid JSON: ") + e.what());
    }
}

HttpResponse checked_send(const Endpoint& ep, HttpRequest req) {
    add_auth(req, ep.api_key);
    HttpResponse resp = ep.transport->send(req);
    if (resp.status < 200 || resp.status >= 300) throw_for_status(resp);
    return resp;
}

std::string chat_content(const json& j) {
    try {
        const auto& c = j.at("choices").at(0).at("message").at("content");
        if (!c.is_string() || c.get<std::string>().empty())
            throw ProviderError(ProviderErrorKind::MalformedResponse, "empty completion");
        return c.get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(ProviderErrorKind::MalformedResponse, std::string("completion shape: ") + e.what());
    }
}

std::string data_url(const VisionRequest& req) {
    return "data:" + req.mime_type + ";base64," + base64_encode(req.image_bytes);
}

}  // namespace

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::milliseconds deadline)
    : base_url_(std::move(base_url)), deadline_(deadline) {}

HttpResponse HttplibTransport::send(const HttpRequest& req) {
    httplib::Client client(base_url_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(deadline_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(deadline_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    for (const auto& [k, v] : req.headers) headers.emplace(k, v);
    httplib::Result res = req.method == "GET" ? client.Get(req.path, headers)
                                              : client.Post(req.path, headers, req.body, req.content_type);
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write ||
            err == httplib::Error::ConnectionTimeout)
            throw ProviderError(ProviderErrorKind::Timeout, httplib::to_string(err));
        throw ProviderError(ProviderErrorKind::Unavailable, httplib::to_string(err));
    }
    return {res->status, res->get_header_value("Content-Type"), res->body};
}

std::string fixture_key(const HttpRequest& req) {
    return sha256_hex(req.method + "\n" + req.path + "\n" + req.content_type + "\n" + req.body);
}

RecordingTransport::RecordingTransport(std::shared_ptr<HttpTransport> inner, std::string dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

HttpResponse RecordingTransport::send(const HttpRequest& req) {
    HttpResponse resp = inner_->send(req);
    json j;
    j["method"] = req.method;
    j["path"] = req.path;
    j["status"] = resp.status;
    j["content_type"] = resp.content_type;
    j["body_b64"] = base64_encode(to_bytes(resp.body));
    std::ofstream out(fs::path(dir_) / (fixture_key(req) + ".json"), std::ios::trunc);
    out << j.dump(2) << '\n';
    return resp;
}

HttpResponse ReplayTransport::send(const HttpRequest& req) {
    const fs::path p = fs::path(dir_) / (fixture_key(req) + ".json");
    std::ifstream in(p);
    if (!in) throw ProviderError(ProviderErrorKind::Unavailable, "no replay fixture " + p.filename().string());
    try {
        const json j = json::parse(in);
        const Bytes body = base64_decode(j.at("body_b64").get<std::string>());
        return {j.at("status").get<int>(), j.value("content_type", ""), std::string(body.begin(), body.end())};
    } catch (const std::exception& e) {
        throw ProviderError(ProviderErrorKind::MalformedResponse, "bad replay fixture: " + std::string(e.what()));
    }
}

void throw_for_status(const HttpResponse& resp) {
    const std::string detail = "HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200);
    switch (resp.status) {
        case 401:
        case 403: throw ProviderError(ProviderErrorKind::AuthFailure, detail);
        case 408:
        case 504: throw ProviderError(ProviderErrorKind::Timeout, detail);
        case 429: throw ProviderError(ProviderErrorKind::RateLimited, detail);
        default: break;
    }
    if (resp.status >= 500) throw ProviderError(ProviderErrorKind::Unavailable, detail);
    throw ProviderError(ProviderErrorKind::MalformedResponse, detail);
}

std::string HttpVision::do_describe_image(const VisionRequest& req) {
    json body;
    body["model"] = ep_.model;
    body["max_tokens"] = 200;
    body["messages"] = json::array(
        {{{"role", "user"},
          {"content", json::array({{{"type", "text"},
                                    {"text", "Describe the single object in this photo in one sentence."}},
                                   {{"type", "image_url"}, {"image_url", {{"url", data_url(req)}}}}})}}});
    HttpRequest http;
    http.path = "/v1/chat/completions";
    http.body = body.dump();
    return chat_content(parse_json(checked_send(ep_, std::move(http)).body));
}

std::string HttpChat::do_chat(const ChatRequest& req) {
    json messages = json::array();
    if (!req.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    for (const auto& m : req.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    json body;
    body["model"] = ep_.model;
    body["messages"] = messages;
    if (req.schema == ResponseSchema::PersonaSheet) body["response_format"] = {{"type", "json_object"}};
    HttpRequest http;
    http.path = "/v1/chat/completions";
    http.body = body.dump();
    return chat_content(parse_json(checked_send(ep_, std::move(http)).body));
}

Embedding HttpEmbedding::post(const std::string& body) {
    HttpRequest http;
    http.path = "/v1/embeddings";
    http.body = body;
    const json j = parse_json(checked_send(ep_, std::move(http)).body);
    try {
        return Embedding{j.at("data").at(0).at("embedding").get<std::vector<float>>()};
    } catch (const json::exception& e) {
        throw ProviderError(ProviderErrorKind::MalformedResponse, std::string("embedding shape: ") + e.what());
    }
}

Embedding HttpEmbedding::do_embed_image(const VisionRequest& req) {
    json body;
    body["model"] = ep_.model;
    body["input"] = json::array({{{"image", data_url(req)}}});
    return post(body.dump());
}

Embedding HttpEmbedding::do_embed_text(std::string_view text) {
    json body;
    body["model"] = ep_.model;
    body["input"] = std::string(text);
    return post(body.dump());
}

Bytes wrap_pcm16_wav(std::span<const std::uint8_t> pcm, int sample_rate) {
    Bytes wav = mock::make_wav_silence(0, sample_rate);
    // Patch RIFF and data chunk sizes, then append samples.
    const auto data_bytes = static_cast<std::uint32_t>(pcm.size());
    const std::uint32_t riff = 36 + data_bytes;
    for (int i = 0; i < 4; ++i) {
        wav[4 + i] = static_cast<std::uint8_t>(riff >> (8 * i));
        wav[40 + i] = static_cast<std::uint8_t>(data_bytes >> (8 * i));
    }
    wav.insert(wav.end(), pcm.begin(), pcm.end());
    return wav;
}

SpeechAudio HttpSpeech::do_synthesize_speech(const SpeechRequest& req) {
    constexpr int kRate = 16000;
    json body;
    body["text"] = req.text;
    body["model_id"] = req.engine_tag;
    HttpRequest http;
    http.path = "/v1/text-to-speech/" + req.voice_id + "?output_format=pcm_16000";
    http.body = body.dump();
    const HttpResponse resp = checked_send(ep_, std::move(http));
    if (resp.body.empty()) throw ProviderError(ProviderErrorKind::MalformedResponse, "empty audio body");
    const Bytes pcm = to_bytes(resp.body);
    return {wrap_pcm16_wav(pcm, kRate), static_cast<std::int64_t>(pcm.size() / 2) * 1000 / kRate};
}

std::string HttpTranscription::do_transcribe(std::span<const std::uint8_t> audio) {
    const std::string boundary = "portal-" + sha256_hex(audio).substr(0, 16);
    std::ostringstream body;
    body << "--" << boundary << "\r\n"
         << "Content-Disposition: form-data; name=\"model\"\r\n\r\n"
         << ep_.model << "\r\n"
         << "--" << boundary << "\r\n"
         << "Content-Disposition: form-data; name=\"file\"; filename=\"clip.wav\"\r\n"
         << "Content-Type: audio/wav\r\n\r\n";
    body.write(reinterpret_cast<const char*>(audio.data()), static_cast<std::streamsize>(audio.size()));
    body << "\r\n--" << boundary << "--\r\n";
    HttpRequest http;
    http.path = "/v1/audio/transcriptions";
    http.content_type = "multipart/form-data; boundary=" + boundary;
    http.body = body.str();
    const json j = parse_json(checked_send(ep_, std::move(http)).body);
    if (!j.contains("text") || !j["text"].is_string())
        throw ProviderError(ProviderErrorKind::MalformedResponse, "transcription without text");
    return j["text"].get<std::string>();
}

}  // namespace portal::http
