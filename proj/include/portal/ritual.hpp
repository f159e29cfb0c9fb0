#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace portal {

enum class RitualPhase { Idle, Request, Conversation, Transformation };
inline constexpr std::array<RitualPhase, 4> kAllPhases{RitualPhase::Idle, RitualPhase::Request,
                                                       RitualPhase::Conversation, RitualPhase::Transformation};
std::string_view to_string(RitualPhase p);

enum class RitualEventKind {
    KeywordAwaken,
    KeywordGoodbye,
    IdentityResolved,
    TurnCompleted,
    SummaryStored,
    Utterance,
    Error
};
inline constexpr std::array<RitualEventKind, 7> kAllEventKinds{
    RitualEventKind::KeywordAwaken, RitualEventKind::KeywordGoodbye, RitualEventKind::IdentityResolved,
    RitualEventKind::TurnCompleted, RitualEventKind::SummaryStored,  RitualEventKind::Utterance,
    RitualEventKind::Error};
std::string_view to_string(RitualEventKind k);

struct RitualEvent {
    RitualEventKind kind = RitualEventKind::Error;
    std::string text;  // utterance text or error detail

    static RitualEvent of(RitualEventKind k) { return {k, {}}; }
    static RitualEvent utterance(std::string text);  // throws on empty text
    static RitualEvent error(std::string detail) { return {RitualEventKind::Error, std::move(detail)}; }
};

// Total transition table:
//   (Idle, KeywordAwaken)            -> Request
//   (Request, IdentityResolved)      -> Conversation
//   (Conversation, KeywordGoodbye)   -> Transformation
//   (Transformation, SummaryStored)  -> Idle
//   (any, Error)                     -> Idle
// Every other pair leaves the phase unchanged.
RitualPhase transition(RitualPhase phase, const RitualEvent& event);

enum class Trigger { Awaken, Goodbye };

struct KeywordSet {
    std::string awaken = "awaken";
    std::string goodbye = "goodbye";
};

// Case-insensitive whole-word (or whole-phrase) match on transcribed
// text. Goodbye wins when both appear.
std::optional<Trigger> detect_keyword(std::string_view text, const KeywordSet& words = {});

struct LightPattern {
    enum class Mode { Off, SteadyBright, Breathing };

    Mode mode = Mode::Off;
    double b_min = 0.15;
    double b_max = 0.9;
    double period_s = 4.0;

    static LightPattern off() { return {Mode::Off}; }
    static LightPattern steady(double level = 0.9) { return {Mode::SteadyBright, 0.0, level, 4.0}; }
    static LightPattern breathing(double lo = 0.15, double hi = 0.9, double period = 4.0) {
        return {Mode::Breathing, lo, hi, period};
    }

    void validate() const;  // throws std::invalid_argument
    bool operator==(const LightPattern&) const = default;
};
std::string_view to_string(LightPattern::Mode m);

// Off -> 0, SteadyBright -> b_max, Breathing -> raised cosine from b_min
// at t = 0 up to b_max at half a period.
double brightness_at(const LightPattern& pattern, double t_seconds);

}  // namespace portal
