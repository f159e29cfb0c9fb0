#include "portal/dialogue.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include <spdlog/spdlog.h>

namespace portal {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string join(const std::vector<std::string>& xs, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

std::string speaker_label(Speaker s, const std::string& name) {
    switch (s) {
        case Speaker::Human: return "Human";
        case Speaker::Object: return name;
        case Speaker::Portal: return "Portal";
    }
    return "Human";
}

std::string format_history(const std::vector<MemoryRecord>& records, const std::string& name) {
    if (records.empty()) return "(no memories yet)";
    std::string out;
    for (const auto& r : records)
        out += "- [" + to_iso8601(r.created_at) + "] " + speaker_label(r.speaker, name) + ": " + r.text + "\n";
    out.pop_back();
    return out;
}

std::string format_relevant(const std::vector<ScoredMemory>& memories, const std::string& name) {
    if (memories.empty()) return "(no memories yet)";
    std::string out;
    char score[32];
    for (const auto& m : memories) {
        std::snprintf(score, sizeof(score), "%.3f", m.score);
        out += std::string("- (relevance ") + score + ") " + speaker_label(m.record.speaker, name) + ": " +
               m.record.text + "\n";
    }
    out.pop_back();
    return out;
}

std::string format_transcript(const std::vector<TranscriptEntry>& tail, const std::string& name) {
    if (tail.empty()) return "(this is the start of the conversation)";
    std::string out;
    for (const auto& e : tail) {
        out += speaker_label(e.speaker, name) + ": ";
        out += e.kind == EntryKind::Silence ? std::string("(stayed silent)") : e.text;
        out += "\n";
    }
    out.pop_back();
    return out;
}

[[noreturn]] void malformed(const std::string& why) {
    throw ProviderError(ProviderErrorKind::MalformedResponse, "two-tier turn: " + why);
}

std::optional<std::size_t> marker_at(std::string_view line) {
    static constexpr std::array<std::string_view, 4> kMarkers{kInnerMarker, kIntentMarker, kSpeakMarker,
                                                              kResponseMarker};
    for (std::size_t i = 0; i < kMarkers.size(); ++i)
        if (line.starts_with(kMarkers[i])) return i;
    return std::nullopt;
}

}  // namespace

void TwoTierTurn::validate() const {
    if (!(engagement_intent >= 0.0 && engagement_intent <= 1.0))
        throw std::invalid_argument("engagement_intent outside [0, 1]");
    if (speak && public_response.empty()) throw std::invalid_argument("speak=yes with an empty response");
    if (!speak && !public_response.empty()) throw std::invalid_argument("speak=no with a non-empty response");
    if (inner_thoughts.empty()) throw std::invalid_argument("empty inner thoughts");
}

void PromptContext::validate() const {
    if (persona.name.empty()) throw std::invalid_argument("prompt context: persona without a name");
    if (human_utterance.empty()) throw std::invalid_argument("prompt context: empty utterance");
    if (transcript_tail.size() > kMaxTranscriptTail)
        throw std::invalid_argument("prompt context: transcript tail longer than 12 turns");
    for (std::size_t i = 1; i < history_window.size(); ++i)
        if (history_window[i].created_at < history_window[i - 1].created_at)
            throw std::invalid_argument("prompt context: history window not chronological");
}

ChatRequest compose_prompt(const PromptContext& ctx, const PromptTemplates& templates) {
    ctx.validate();
    const Persona& p = ctx.persona;
    ChatRequest req;
    req.schema = ResponseSchema::TwoTierTurn;
    req.system_prompt = render_template(templates.dialogue,
                                        {{"name", p.name},
                                         {"traits", join(p.traits, ", ")},
                                         {"speaking_style", p.speaking_style},
                                         {"backstory", p.backstory},
                                         {"mood_seed", p.mood_seed.empty() ? std::string("calm") : p.mood_seed},
                                         {"history", format_history(ctx.history_window, p.name)},
                                         {"relevant", format_relevant(ctx.relevant_memories, p.name)},
                                         {"transcript", format_transcript(ctx.transcript_tail, p.name)}});
    req.messages.push_back({Role::User, ctx.human_utterance});
    return req;
}

TwoTierTurn parse_two_tier(std::string_view raw) {
    if (trim(raw).empty()) malformed("empty reply");
    std::array<std::optional<std::string>, 4> sections;
    std::optional<std::size_t> current;
    std::istringstream in{std::string(raw)};
    std::string line;
    while (std::getline(in, line)) {
        const std::string_view view(line);
        const auto lead = view.find_first_not_of(" \t");
        const std::string_view body = lead == std::string_view::npos ? std::string_view{} : view.substr(lead);
        if (auto m = marker_at(body)) {
            if (sections[*m]) malformed("repeated section");
            static constexpr std::array<std::size_t, 4> kLen{kInnerMarker.size(), kIntentMarker.size(),
                                                             kSpeakMarker.size(), kResponseMarker.size()};
            sections[*m] = std::string(body.substr(kLen[*m]));
            current = m;
        } else if (current) {
            *sections[*current] += "\n" + line;
        }
        // Text before the first marker is ignored.
    }
    static constexpr std::array<const char*, 4> kNames{"INNER", "INTENT", "SPEAK", "RESPONSE"};
    for (std::size_t i = 0; i < sections.size(); ++i)
        if (!sections[i]) malformed(std::string("missing ") + kNames[i] + " section");

    TwoTierTurn turn;
    turn.inner_thoughts = trim(*sections[0]);

    const std::string intent = trim(*sections[1]);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(intent.data(), intent.data() + intent.size(), value);
    if (ec != std::errc{} || ptr != intent.data() + intent.size() || intent.empty() || !std::isfinite(value))
        malformed("INTENT is not a number: '" + intent + "'");
    turn.engagement_intent = value;

    const std::string speak = lower(trim(*sections[2]));
    if (speak == "yes" || speak == "true") {
        turn.speak = true;
    } else if (speak == "no" || speak == "false") {
        turn.speak = false;
    } else {
        malformed("SPEAK must be yes or no, got '" + speak + "'");
    }
    turn.public_response = trim(*sections[3]);

    try {
        turn.validate();
    } catch (const std::invalid_argument& e) {
        malformed(e.what());
    }
    return turn;
}

std::string format_two_tier(const TwoTierTurn& turn) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), turn.engagement_intent);
    std::string out;
    out += std::string(kInnerMarker) + " " + turn.inner_thoughts + "\n";
    out += std::string(kIntentMarker) + " " + std::string(buf, res.ptr) + "\n";
    out += std::string(kSpeakMarker) + " " + (turn.speak ? "yes" : "no") + "\n";
    out += std::string(kResponseMarker);
    if (!turn.public_response.empty()) out += " " + turn.public_response;
    return out;
}

TwoTierTurn generate_turn(const PromptContext& ctx, ChatProvider& chat, const PromptTemplates& templates) {
    ChatRequest req = compose_prompt(ctx, templates);
    const std::string first = chat.chat(req);
    try {
        return parse_two_tier(first);
    } catch (const ProviderError& e) {
        if (e.kind() != ProviderErrorKind::MalformedResponse) throw;
        spdlog::warn("malformed turn, re-asking once: {}", e.what());
    }
    req.messages.push_back({Role::Assistant, first});
    req.messages.push_back({Role::User, trim(templates.corrective)});
    return parse_two_tier(chat.chat(req));
}

}  // namespace portal
