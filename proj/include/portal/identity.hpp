#pragma once

#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "portal/ids.hpp"
#include "portal/persistence.hpp"
#include "portal/providers.hpp"
#include "portal/templates.hpp"
#include "portal/types.hpp"

namespace portal {

inline constexpr double kDefaultMatchThreshold = 0.85;

struct MatchResult {
    enum class Outcome { Matched, NewObject };

    Outcome outcome = Outcome::NewObject;
    std::string object_id;  // matched profile, or a freshly minted id
    // Best similarity over the registry; absent for an empty registry.
    std::optional<double> similarity;
    double threshold = kDefaultMatchThreshold;

    bool matched() const { return outcome == Outcome::Matched; }
};

// Linear scan for the most similar profile. Matched iff the best cosine
// similarity reaches `threshold`; equal similarities go to the earliest
// created_at. Throws std::invalid_argument for a threshold outside (0, 1]
// or a query whose dimension differs from the registry's.
MatchResult match_object(const Embedding& query, std::span<const ObjectProfile> registry, double threshold,
                         IdSource& ids);

class PersonaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parses a PersonaSheet reply (a JSON object, optionally wrapped in prose
// or code fences). A missing voice_id is filled deterministically from
// `voices`; an unknown one is rejected. Throws ProviderError{MalformedResponse}.
Persona parse_persona_sheet(std::string_view raw, const std::vector<std::string>& voices);

// One PersonaSheet chat call; a malformed reply is re-asked once.
Persona generate_persona(const std::string& description, ChatProvider& chat, const PromptTemplates& templates,
                         const std::vector<std::string>& voices);

// In-memory view of the persisted registry. Many readers, one writer;
// every mutation is written through to the store before it becomes
// visible.
class Registry {
public:
    explicit Registry(Store& store);

    std::vector<ObjectProfile> all() const;
    std::optional<ObjectProfile> find(const std::string& object_id) const;
    bool contains(const std::string& object_id) const;
    std::size_t size() const;
    const std::vector<std::string>& load_warnings() const { return warnings_; }

    MatchResult match(const Embedding& query, double threshold, IdSource& ids) const;

    void insert(const ObjectProfile& profile);  // throws std::invalid_argument on a duplicate id
    void update(const ObjectProfile& profile);  // throws std::invalid_argument on an unknown id

    // Held across match-then-insert so concurrent first meetings of the
    // same object produce one profile.
    std::mutex& resolve_mutex() { return resolve_mutex_; }

private:
    Store& store_;
    mutable std::shared_mutex mutex_;
    std::vector<ObjectProfile> profiles_;
    std::vector<std::string> warnings_;
    std::mutex resolve_mutex_;
};

struct IdentityContext {
    ProviderSet providers;
    Registry& registry;
    Store& store;
    Clock& clock;
    IdSource& ids;
    const PromptTemplates& templates;
    std::vector<std::string> voices;
    double threshold = kDefaultMatchThreshold;
};

struct Resolution {
    ObjectProfile profile;
    bool was_new = false;
    std::optional<double> similarity;
};

// Re-recognizes the object in `image`, or performs a first meeting:
// describe, generate persona, persist. A failure leaves no partial
// profile or orphaned image behind.
Resolution resolve_identity(const VisionRequest& image, IdentityContext& ctx);

}  // namespace portal
