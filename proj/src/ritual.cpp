#include "portal/ritual.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace portal {

std::string_view to_string(RitualPhase p) {
    switch (p) {
        case RitualPhase::Idle: return "Idle";
        case RitualPhase::Request: return "Request";
        case RitualPhase::Conversation: return "Conversation";
        case RitualPhase::Transformation: return "Transformation";
    }
    return "Idle";
}

std::string_view to_string(RitualEventKind k) {
    switch (k) {
        case RitualEventKind::KeywordAwaken: return "KeywordAwaken";
        case RitualEventKind::KeywordGoodbye: return "KeywordGoodbye";
        case RitualEventKind::IdentityResolved: return "IdentityResolved";
        case RitualEventKind::TurnCompleted: return "TurnCompleted";
        case RitualEventKind::SummaryStored: return "SummaryStored";
        case RitualEventKind::Utterance: return "Utterance";
        case RitualEventKind::Error: return "Error";
    }
    return "Error";
}

RitualEvent RitualEvent::utterance(std::string text) {
    if (text.empty()) throw std::invalid_argument("utterance event needs text");
    return {RitualEventKind::Utterance, std::move(text)};
}

RitualPhase transition(RitualPhase phase, const RitualEvent& event) {
    if (event.kind == RitualEventKind::Error) return RitualPhase::Idle;
    switch (phase) {
        case RitualPhase::Idle:
            if (event.kind == RitualEventKind::KeywordAwaken) return RitualPhase::Request;
            break;
        case RitualPhase::Request:
            if (event.kind == RitualEventKind::IdentityResolved) return RitualPhase::Conversation;
            break;
        case RitualPhase::Conversation:
            if (event.kind == RitualEventKind::KeywordGoodbye) return RitualPhase::Transformation;
            break;
        case RitualPhase::Transformation:
            if (event.kind == RitualEventKind::SummaryStored) return RitualPhase::Idle;
            break;
    }
    return phase;
}

namespace {

// Bytes >= 0x80 count as word characters so UTF-8 letters never split a word.
bool word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

std::vector<std::string> words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (word_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool contains_phrase(const std::vector<std::string>& text, const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > text.size()) return false;
    return std::search(text.begin(), text.end(), phrase.begin(), phrase.end()) != text.end();
}

}  // namespace

std::optional<Trigger> detect_keyword(std::string_view text, const KeywordSet& set) {
    const auto tokens = words(text);
    if (contains_phrase(tokens, words(set.goodbye))) return Trigger::Goodbye;
    if (contains_phrase(tokens, words(set.awaken))) return Trigger::Awaken;
    return std::nullopt;
}

void LightPattern::validate() const {
    if (b_min < 0.0 || b_max > 1.0) throw std::invalid_argument("light levels must lie in [0, 1]");
    if (mode == Mode::Breathing) {
        if (!(b_min < b_max)) throw std::invalid_argument("breathing needs b_min < b_max");
        if (!(period_s > 0.0)) throw std::invalid_argument("breathing needs a positive period");
    }
}

std::string_view to_string(LightPattern::Mode m) {
    switch (m) {
        case LightPattern::Mode::Off: return "Off";
        case LightPattern::Mode::SteadyBright: return "SteadyBright";
        case LightPattern::Mode::Breathing: return "Breathing";
    }
    return "Off";
}

double brightness_at(const LightPattern& p, double t) {
    if (t < 0.0) throw std::invalid_argument("brightness_at: negative time");
    switch (p.mode) {
        case LightPattern::Mode::Off: return 0.0;
        case LightPattern::Mode::SteadyBright: return p.b_max;
        case LightPattern::Mode::Breathing: {
            const double phase = std::fmod(t, p.period_s) / p.period_s;
            return p.b_min + (p.b_max - p.b_min) * (1.0 - std::cos(2.0 * std::numbers::pi * phase)) / 2.0;
        }
    }
    return 0.0;
}

}  // namespace portal
