#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "portal/embedding.hpp"
#include "portal/time.hpp"

namespace portal {

// Character sheet generated at an object's first meeting.
struct Persona {
    std::string name;
    std::vector<std::string> traits;  // 3..7 entries
    std::string speaking_style;
    std::string backstory;
    std::string voice_id;
    std::string mood_seed;

    static constexpr std::size_t kMinTraits = 3;
    static constexpr std::size_t kMaxTraits = 7;

    bool operator==(const Persona&) const = default;
};

struct ObjectProfile {
    std::string object_id;
    std::string description;
    Persona persona;
    Embedding embedding;
    Timestamp created_at;
    Timestamp last_seen_at;
    std::vector<std::string> image_refs;

    bool operator==(const ObjectProfile&) const = default;
};

enum class Speaker { Human, Object, Portal };
std::string_view to_string(Speaker s);
Speaker speaker_from_string(std::string_view s);  // throws std::invalid_argument

struct MemoryRecord {
    std::string memory_id;
    std::string object_id;
    std::string session_id;
    Speaker speaker = Speaker::Human;
    std::string text;
    Embedding embedding;
    Timestamp created_at;

    bool operator==(const MemoryRecord&) const = default;
};

inline constexpr std::string_view kSummaryPrefix = "[summary] ";

enum class EntryKind { Utterance, Silence, Apology };
std::string_view to_string(EntryKind k);
EntryKind entry_kind_from_string(std::string_view s);

struct TranscriptEntry {
    Speaker speaker = Speaker::Human;
    EntryKind kind = EntryKind::Utterance;
    std::string text;  // empty for Silence
    Timestamp ts;

    bool operator==(const TranscriptEntry&) const = default;
};

// Operator-channel record of one covert reasoning pass.
struct InnerThoughtsEntry {
    Timestamp ts;
    std::string inner_thoughts;
    double engagement_intent = 0.0;
    bool speak = false;

    bool operator==(const InnerThoughtsEntry&) const = default;
};

struct SessionLog {
    std::string session_id;
    std::string object_id;
    bool was_new = false;
    Timestamp started_at;
    Timestamp ended_at;
    std::vector<TranscriptEntry> transcript;
    std::vector<InnerThoughtsEntry> inner_thoughts;
    std::optional<std::string> summary_ref;  // memory_id of the summary record
    bool summary_skipped = false;

    bool operator==(const SessionLog&) const = default;
};

}  // namespace portal
