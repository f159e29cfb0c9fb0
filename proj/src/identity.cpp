#include "portal/identity.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "portal/kernels.hpp"

namespace portal {

using nlohmann::json;

MatchResult match_object(const Embedding& query, std::span<const ObjectProfile> registry, double threshold,
                         IdSource& ids) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("match threshold must be in (0, 1]");
    if (query.dim() == 0 || query.norm() == 0.0) throw std::invalid_argument("match_object: zero query");

    MatchResult result;
    result.threshold = threshold;

    std::vector<kernels::Row> rows;
    rows.reserve(registry.size());
    for (const auto& p : registry) {
        if (p.embedding.dim() != query.dim()) throw std::invalid_argument("match_object: dimension mismatch");
        rows.push_back(p.embedding.view());
    }
    const std::vector<double> scores = kernels::cosine_scores(query.view(), rows);

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!best || scores[i] > scores[*best] ||
            (scores[i] == scores[*best] && registry[i].created_at < registry[*best].created_at)) {
            best = i;
        }
    }
    if (best) result.similarity = scores[*best];
    if (best && scores[*best] >= threshold) {
        result.outcome = MatchResult::Outcome::Matched;
        result.object_id = registry[*best].object_id;
    } else {
        result.outcome = MatchResult::Outcome::NewObject;
        result.object_id = ids.next();
    }
    return result;
}

namespace {

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string string_field(const json& j, const char* key, bool required) {
    if (!j.contains(key)) {
        if (required) throw std::invalid_argument(std::string("missing ") + key);
        return {};
    }
    if (!j[key].is_string()) throw std::invalid_argument(std::string(key) + " is not a string");
    return trimmed(j[key].get<std::string>());
}

}  // namespace

Persona parse_persona_sheet(std::string_view raw, const std::vector<std::string>& voices) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw ProviderError(ProviderErrorKind::MalformedResponse, "persona sheet: no JSON object");
    try {
        const json j = json::parse(raw.substr(open, close - open + 1));
        Persona p;
        p.name = string_field(j, "name", true);
        if (p.name.empty()) throw std::invalid_argument("empty name");
        if (!j.contains("traits") || !j["traits"].is_array()) throw std::invalid_argument("traits is not a list");
        for (const auto& t : j["traits"]) {
            if (!t.is_string() || trimmed(t.get<std::string>()).empty())
                throw std::invalid_argument("trait is not a non-empty string");
            p.traits.push_back(trimmed(t.get<std::string>()));
        }
        if (p.traits.size() < Persona::kMinTraits || p.traits.size() > Persona::kMaxTraits)
            throw std::invalid_argument("need 3 to 7 traits, got " + std::to_string(p.traits.size()));
        p.speaking_style = string_field(j, "speaking_style", true);
        p.backstory = string_field(j, "backstory", true);
        p.mood_seed = string_field(j, "mood_seed", false);
        p.voice_id = string_field(j, "voice_id", false);
        if (p.voice_id.empty()) {
            if (voices.empty()) throw std::invalid_argument("no voices configured");
            const auto h = std::stoull(sha256_hex(p.name).substr(0, 8), nullptr, 16);
            p.voice_id = voices[h % voices.size()];
        } else if (!voices.empty() && std::find(voices.begin(), voices.end(), p.voice_id) == voices.end()) {
            throw std::invalid_argument("voice_id " + p.voice_id + " is not a configured voice");
        }
        return p;
    } catch (const ProviderError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProviderError(ProviderErrorKind::MalformedResponse, std::string("persona sheet: ") + e.what());
    }
}

Persona generate_persona(const std::string& description, ChatProvider& chat, const PromptTemplates& templates,
                         const std::vector<std::string>& voices) {
    if (trimmed(description).empty()) throw std::invalid_argument("generate_persona: empty description");
    std::string voice_list;
    for (const auto& v : voices) voice_list += (voice_list.empty() ? "\"" : ", \"") + v + "\"";

    ChatRequest req;
    req.schema = ResponseSchema::PersonaSheet;
    req.system_prompt = render_template(templates.persona, {{"description", description}, {"voices", voice_list}});
    req.messages.push_back({Role::User, "Who are you?"});

    std::string raw = chat.chat(req);
    try {
        return parse_persona_sheet(raw, voices);
    } catch (const ProviderError& first) {
        spdlog::warn("persona sheet rejected, asking again: {}", first.what());
    }
    req.messages.push_back({Role::Assistant, raw});
    req.messages.push_back({Role::User, "That was not a valid persona sheet. Reply with the JSON object only."});
    raw = chat.chat(req);
    try {
        return parse_persona_sheet(raw, voices);
    } catch (const ProviderError& second) {
        throw PersonaError(std::string("persona generation failed: ") + second.what());
    }
}

Registry::Registry(Store& store) : store_(store) {
    auto loaded = store_.load_registry();
    profiles_ = std::move(loaded.items);
    warnings_ = std::move(loaded.warnings);
}

std::vector<ObjectProfile> Registry::all() const {
    std::shared_lock lock(mutex_);
    return profiles_;
}

std::optional<ObjectProfile> Registry::find(const std::string& object_id) const {
    std::shared_lock lock(mutex_);
    for (const auto& p : profiles_)
        if (p.object_id == object_id) return p;
    return std::nullopt;
}

bool Registry::contains(const std::string& object_id) const { return find(object_id).has_value(); }

std::size_t Registry::size() const {
    std::shared_lock lock(mutex_);
    return profiles_.size();
}

MatchResult Registry::match(const Embedding& query, double threshold, IdSource& ids) const {
    std::shared_lock lock(mutex_);
    MatchResult r = match_object(query, profiles_, threshold, ids);
    // A minted id colliding with a stored one is astronomically unlikely
    // with UUIDv4, but uniqueness is an invariant, so re-draw.
    if (!r.matched()) {
        while (std::any_of(profiles_.begin(), profiles_.end(),
                           [&](const ObjectProfile& p) { return p.object_id == r.object_id; }))
            r.object_id = ids.next();
    }
    return r;
}

void Registry::insert(const ObjectProfile& profile) {
    std::unique_lock lock(mutex_);
    for (const auto& p : profiles_)
        if (p.object_id == profile.object_id)
            throw std::invalid_argument("registry already holds object " + profile.object_id);
    store_.save_profile(profile);
    profiles_.push_back(profile);
}

void Registry::update(const ObjectProfile& profile) {
    std::unique_lock lock(mutex_);
    auto it = std::find_if(profiles_.begin(), profiles_.end(),
                           [&](const ObjectProfile& p) { return p.object_id == profile.object_id; });
    if (it == profiles_.end()) throw std::invalid_argument("unknown object " + profile.object_id);
    store_.save_profile(profile);
    *it = profile;
}

Resolution resolve_identity(const VisionRequest& image, IdentityContext& ctx) {
    image.validate();
    if (!ctx.providers.embedding || !ctx.providers.vision || !ctx.providers.chat)
        throw std::invalid_argument("resolve_identity: providers not bound");

    const Embedding embedding = ctx.providers.embedding->embed_image(image);

    std::lock_guard serial(ctx.registry.resolve_mutex());
    const MatchResult match = ctx.registry.match(embedding, ctx.threshold, ctx.ids);

    Resolution out;
    out.similarity = match.similarity;
    if (match.matched()) {
        ObjectProfile profile = *ctx.registry.find(match.object_id);
        Timestamp ts = ctx.clock.now();
        if (ts <= profile.last_seen_at) ts = profile.last_seen_at.plus(std::chrono::microseconds(1));
        const std::string ref = ctx.store.archive_image(profile.object_id, image.image_bytes, ts, image.mime_type);
        profile.last_seen_at = ts;
        profile.image_refs.push_back(ref);
        try {
            ctx.registry.update(profile);
        } catch (...) {
            ctx.store.remove_image(ref);
            throw;
        }
        out.profile = std::move(profile);
        out.was_new = false;
        return out;
    }

    ObjectProfile profile;
    profile.object_id = match.object_id;
    profile.description = ctx.providers.vision->describe_image(image);
    profile.persona = generate_persona(profile.description, *ctx.providers.chat, ctx.templates, ctx.voices);
    profile.embedding = embedding;
    profile.created_at = ctx.clock.now();
    profile.last_seen_at = profile.created_at;
    const std::string ref =
        ctx.store.archive_image(profile.object_id, image.image_bytes, profile.created_at, image.mime_type);
    profile.image_refs.push_back(ref);
    try {
        ctx.registry.insert(profile);
    } catch (...) {
        ctx.store.remove_image(ref);
        throw;
    }
    spdlog::info("first meeting: {} is now {}", profile.object_id, profile.persona.name);
    out.profile = std::move(profile);
    out.was_new = true;
    return out;
}

}  // namespace portal
