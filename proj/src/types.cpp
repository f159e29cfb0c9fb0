#include "portal/types.hpp"

#include <stdexcept>

namespace portal {

std::string_view to_string(Speaker s) {
    switch (s) {
        case Speaker::Human: return "human";
        case Speaker::Object: return "object";
        case Speaker::Portal: return "portal";
    }
    return "human";
}

Speaker speaker_from_string(std::string_view s) {
    if (s == "human") return Speaker::Human;
    if (s == "object") return Speaker::Object;
    if (s == "portal") return Speaker::Portal;
    throw std::invalid_argument("unknown speaker: " + std::string(s));
}

std::string_view to_string(EntryKind k) {
    switch (k) {
        case EntryKind::Utterance: return "utterance";
        case EntryKind::Silence: return "silence";
        case EntryKind::Apology: return "apology";
    }
    return "utterance";
}

EntryKind entry_kind_from_string(std::string_view s) {
    if (s == "utterance") return EntryKind::Utterance;
    if (s == "silence") return EntryKind::Silence;
    if (s == "apology") return EntryKind::Apology;
    throw std::invalid_argument("unknown transcript entry kind: " + std::string(s));
}

}  // namespace portal
