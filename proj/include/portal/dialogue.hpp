#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "portal/memory.hpp"
#include "portal/providers.hpp"
#include "portal/templates.hpp"
#include "portal/types.hpp"

namespace portal {

// One generation: the covert tier (inner thoughts, engagement intent,
// the choice to speak) and the public reply.
struct TwoTierTurn {
    std::string inner_thoughts;
    double engagement_intent = 0.0;  // [0, 1]; informative only, `speak` decides
    bool speak = false;
    std::string public_response;  // non-empty iff speak

    void validate() const;  // throws std::invalid_argument
    bool operator==(const TwoTierTurn&) const = default;
};

struct PromptContext {
    static constexpr std::size_t kMaxTranscriptTail = 12;

    Persona persona;
    std::vector<MemoryRecord> history_window;  // oldest first
    std::vector<ScoredMemory> relevant_memories;
    std::vector<TranscriptEntry> transcript_tail;
    std::string human_utterance;

    void validate() const;
};

// Section markers of the output grammar, one per line, in this order.
inline constexpr std::string_view kInnerMarker = "INNER:";
inline constexpr std::string_view kIntentMarker = "INTENT:";
inline constexpr std::string_view kSpeakMarker = "SPEAK:";
inline constexpr std::string_view kResponseMarker = "RESPONSE:";

// Pure function of the context: same context, byte-identical request.
ChatRequest compose_prompt(const PromptContext& ctx, const PromptTemplates& templates);

// Throws ProviderError{MalformedResponse} when a section is missing or
// repeated, a value does not parse, or a turn invariant fails.
TwoTierTurn parse_two_tier(std::string_view raw);
std::string format_two_tier(const TwoTierTurn& turn);

// compose -> chat -> parse, re-asking once with a corrective instruction
// when the first reply is malformed.
TwoTierTurn generate_turn(const PromptContext& ctx, ChatProvider& chat, const PromptTemplates& templates);

}  // namespace portal
