#include "portal/mock_providers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace portal::mock {

namespace {

std::uint64_t seed_from(std::string_view domain, std::span<const std::uint8_t> bytes) {
    Bytes buf(domain.begin(), domain.end());
    buf.push_back(0);
    buf.insert(buf.end(), bytes.begin(), bytes.end());
    const std::string hex = sha256_hex(buf);
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

std::string last_user_text(const ChatRequest& req) {
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it)
        if (it->role == Role::User) return it->text;
    return {};
}

void put_u32(Bytes& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace

std::string hash_tag(std::span<const std::uint8_t> bytes) { return sha256_hex(bytes).substr(0, 8); }

Embedding seeded_unit_vector(std::string_view domain, std::span<const std::uint8_t> bytes,
                             std::size_t dim) {
    // mt19937_64 output is fully specified by the standard; the Gaussian
    // transform is done by hand (Box-Muller) so vectors are identical on
    // every standard library.
    std::mt19937_64 rng(seed_from(domain, bytes));
    auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    std::vector<float> v(dim);
    for (std::size_t i = 0; i < dim; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * M_PI * uniform();
        v[i] = static_cast<float>(r * std::cos(theta));
        if (i + 1 < dim) v[i + 1] = static_cast<float>(r * std::sin(theta));
    }
    return normalized(v);
}

void MockVision::set_tag(const std::string& sha256, std::string tag) {
    std::lock_guard lock(mutex_);
    tags_[sha256] = std::move(tag);
}

void MockVision::set_description(const std::string& sha256, std::string description) {
    std::lock_guard lock(mutex_);
    descriptions_[sha256] = std::move(description);
}

int MockVision::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::string MockVision::do_describe_image(const VisionRequest& req) {
    const std::string hash = sha256_hex(req.image_bytes);
    std::lock_guard lock(mutex_);
    ++calls_;
    if (auto it = descriptions_.find(hash); it != descriptions_.end()) return it->second;
    if (auto it = tags_.find(hash); it != tags_.end()) return "mock object " + it->second;
    return "mock object " + hash.substr(0, 8);
}

Embedding MockEmbedding::do_embed_image(const VisionRequest& req) {
    return seeded_unit_vector("image", req.image_bytes, dim_);
}

Embedding MockEmbedding::do_embed_text(std::string_view text) {
    const Bytes b = to_bytes(text);
    return seeded_unit_vector("text", b, dim_);
}

ScriptedChat::ScriptedChat(std::vector<std::string> replies) {
    for (auto& r : replies) script_.push_back({std::move(r)});
}

void ScriptedChat::push(std::string reply) {
    std::lock_guard lock(mutex_);
    script_.push_back({std::move(reply)});
}

void ScriptedChat::push_error(ProviderErrorKind kind, std::string detail) {
    std::lock_guard lock(mutex_);
    script_.push_back({std::move(detail), true, kind});
}

std::size_t ScriptedChat::remaining() const {
    std::lock_guard lock(mutex_);
    return script_.size();
}

std::vector<ChatRequest> ScriptedChat::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

int ScriptedChat::calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(requests_.size());
}

std::string ScriptedChat::do_chat(const ChatRequest& req) {
    std::lock_guard lock(mutex_);
    requests_.push_back(req);
    if (script_.empty()) throw ProviderError(ProviderErrorKind::Unavailable, "chat script exhausted");
    Entry e = std::move(script_.front());
    script_.pop_front();
    if (e.is_error) throw ProviderError(e.kind, e.reply);
    return e.reply;
}

SyntheticChat::SyntheticChat(std::vector<std::string> voices) : voices_(std::move(voices)) {
    if (voices_.empty()) voices_.push_back("warm");
}

std::string SyntheticChat::do_chat(const ChatRequest& req) {
    static const char* kNames[] = {"Murmur", "Pip", "Ember", "Tansy", "Quill", "Moss", "Lumen", "Sorrel"};
    static const char* kTraits[] = {"curious", "patient", "wry",     "gentle",  "proud",
                                    "shy",     "nostalgic", "playful", "watchful", "tender"};
    const std::string user = last_user_text(req);
    const std::string h = sha256_hex(req.system_prompt + "\n" + user);
    auto pick = [&h](std::size_t offset, std::size_t n) {
        return static_cast<std::size_t>(std::stoul(h.substr(offset, 4), nullptr, 16)) % n;
    };
    switch (req.schema) {
        case ResponseSchema::PersonaSheet: {
            nlohmann::json sheet;
            sheet["name"] = kNames[pick(0, std::size(kNames))];
            nlohmann::json traits = nlohmann::json::array();
            const std::size_t first = pick(4, std::size(kTraits));
            for (std::size_t i = 0; i < 3; ++i) traits.push_back(kTraits[(first + 3 * i) % std::size(kTraits)]);
            sheet["traits"] = traits;
            sheet["speaking_style"] = "short, soft sentences";
            sheet["backstory"] = "It has waited quietly on a shelf for a long time.";
            sheet["voice_id"] = voices_[pick(8, voices_.size())];
            sheet["mood_seed"] = kTraits[pick(12, std::size(kTraits))];
            return sheet.dump();
        }
        case ResponseSchema::TwoTierTurn: {
            std::string said = user;
            std::replace(said.begin(), said.end(), '\n', ' ');
            const bool speak = said.find("...") == std::string::npos;
            const int intent = speak ? 60 + static_cast<int>(pick(0, 40)) : static_cast<int>(pick(0, 20));
            char intent_text[16];
            std::snprintf(intent_text, sizeof intent_text, "%.2f", intent / 100.0);
            std::ostringstream out;
            out << "INNER: they said \"" << said.substr(0, 40) << "\" and "
                << (speak ? "I want to answer" : "I would rather keep quiet") << "\n"
                << "INTENT: " << intent_text << "\n"
                << "SPEAK: " << (speak ? "yes" : "no") << "\n"
                << "RESPONSE:";
            if (speak) out << " I hear you. You said: " << said;
            return out.str();
        }
        case ResponseSchema::FreeText:
            return "A short visit; we talked about " + user.substr(0, 60);
    }
    return "...";
}

Bytes make_wav_silence(std::int64_t duration_ms, int sample_rate) {
    const auto samples = static_cast<std::uint32_t>(duration_ms * sample_rate / 1000);
    const std::uint32_t data_bytes = samples * 2;
    Bytes b;
    b.reserve(44 + data_bytes);
    for (char c : std::string_view("RIFF")) b.push_back(static_cast<std::uint8_t>(c));
    put_u32(b, 36 + data_bytes);
    for (char c : std::string_view("WAVEfmt ")) b.push_back(static_cast<std::uint8_t>(c));
    put_u32(b, 16);
    put_u16(b, 1);  // PCM
    put_u16(b, 1);  // mono
    put_u32(b, static_cast<std::uint32_t>(sample_rate));
    put_u32(b, static_cast<std::uint32_t>(sample_rate) * 2);
    put_u16(b, 2);
    put_u16(b, 16);
    for (char c : std::string_view("data")) b.push_back(static_cast<std::uint8_t>(c));
    put_u32(b, data_bytes);
    b.resize(b.size() + data_bytes, 0);
    return b;
}

std::vector<SpeechRequest> MockSpeech::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

SpeechAudio MockSpeech::do_synthesize_speech(const SpeechRequest& req) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(req);
    }
    const auto ms = static_cast<std::int64_t>(utf8_length(req.text)) * kMillisPerChar;
    return {make_wav_silence(ms), ms};
}

void MockTranscription::add(std::span<const std::uint8_t> audio, std::string transcript) {
    std::lock_guard lock(mutex_);
    transcripts_[sha256_hex(audio)] = std::move(transcript);
}

void MockTranscription::add_fixtures(const std::string& dir,
                                     const std::map<std::string, std::string>& transcripts) {
    for (const auto& [name, text] : transcripts) add(read_file_bytes(dir + "/" + name), text);
}

std::string MockTranscription::do_transcribe(std::span<const std::uint8_t> audio) {
    std::lock_guard lock(mutex_);
    auto it = transcripts_.find(sha256_hex(audio));
    if (it == transcripts_.end())
        throw ProviderError(ProviderErrorKind::Unavailable, "no transcript fixture for clip");
    return it->second;
}

}  // namespace portal::mock
