#include "portal/memory.hpp"

#include <algorithm>
#include <stdexcept>

#include "portal/kernels.hpp"

namespace portal {

void MemoryQuery::validate() const {
    if (limit < 1) throw std::invalid_argument("memory query: limit must be >= 1");
    if (mode == Mode::Search && query_text.empty())
        throw std::invalid_argument("memory query: search needs query text");
}

MemoryStore::MemoryStore(Store& store, Clock& clock, IdSource& ids, ObjectExists exists)
    : store_(store), clock_(clock), ids_(ids), exists_(std::move(exists)) {}

MemoryStore::Shelf& MemoryStore::shelf(const std::string& object_id) const {
    {
        std::shared_lock lock(shelves_mutex_);
        if (auto it = shelves_.find(object_id); it != shelves_.end()) return *it->second;
    }
    std::unique_lock lock(shelves_mutex_);
    auto& slot = shelves_[object_id];
    if (!slot) {
        slot = std::make_unique<Shelf>();
        slot->records = store_.load_memories(object_id).items;
        std::stable_sort(slot->records.begin(), slot->records.end(),
                         [](const MemoryRecord& a, const MemoryRecord& b) { return a.created_at < b.created_at; });
    }
    return *slot;
}

MemoryRecord MemoryStore::store_memory(const std::string& object_id, const std::string& session_id,
                                       Speaker speaker, const std::string& text, EmbeddingProvider& embedder) {
    if (text.empty()) throw std::invalid_argument("store_memory: empty text");
    if (speaker == Speaker::Portal) throw std::invalid_argument("store_memory: speaker must be human or object");
    if (!exists_ || !exists_(object_id)) throw std::invalid_argument("store_memory: unknown object " + object_id);

    MemoryRecord record;
    record.object_id = object_id;
    record.session_id = session_id;
    record.speaker = speaker;
    record.text = text;
    record.embedding = embedder.embed_text(text);

    Shelf& s = shelf(object_id);
    std::unique_lock lock(s.mutex);
    record.memory_id = ids_.next();
    record.created_at = clock_.now();
    if (!s.records.empty() && record.created_at <= s.records.back().created_at)
        record.created_at = s.records.back().created_at.plus(std::chrono::microseconds(1));
    store_.append_memory(record);
    s.records.push_back(record);
    return record;
}

std::vector<MemoryRecord> MemoryStore::retrieve_history(const std::string& object_id, std::size_t limit,
                                                        const std::string& exclude_session) const {
    if (limit < 1) throw std::invalid_argument("retrieve_history: limit must be >= 1");
    Shelf& s = shelf(object_id);
    std::shared_lock lock(s.mutex);
    std::vector<MemoryRecord> out;
    for (auto it = s.records.rbegin(); it != s.records.rend() && out.size() < limit; ++it) {
        if (!exclude_session.empty() && it->session_id == exclude_session) continue;
        out.push_back(*it);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<ScoredMemory> MemoryStore::retrieve_relevant(const std::string& object_id, const std::string& query_text,
                                                         std::size_t limit, EmbeddingProvider& embedder,
                                                         const std::string& exclude_session) const {
    if (limit < 1) throw std::invalid_argument("retrieve_relevant: limit must be >= 1");
    if (query_text.empty()) throw std::invalid_argument("retrieve_relevant: empty query");
    const Embedding q = embedder.embed_text(query_text);

    std::vector<MemoryRecord> candidates;
    {
        Shelf& s = shelf(object_id);
        std::shared_lock lock(s.mutex);
        for (const auto& r : s.records)
            if (exclude_session.empty() || r.session_id != exclude_session) candidates.push_back(r);
    }
    std::vector<kernels::Row> rows;
    rows.reserve(candidates.size());
    for (const auto& r : candidates) {
        if (r.embedding.dim() != q.dim()) throw std::invalid_argument("retrieve_relevant: dimension mismatch");
        rows.push_back(r.embedding.view());
    }
    const std::vector<double> scores = kernels::cosine_scores(q.view(), rows);

    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t k = std::min(limit, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return candidates[a].created_at > candidates[b].created_at;
                      });
    std::vector<ScoredMemory> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({candidates[order[i]], scores[order[i]]});
    return out;
}

std::vector<ScoredMemory> MemoryStore::query(const MemoryQuery& q, EmbeddingProvider& embedder) const {
    q.validate();
    if (q.mode == MemoryQuery::Mode::Search) return retrieve_relevant(q.object_id, q.query_text, q.limit, embedder);
    std::vector<ScoredMemory> out;
    for (auto& r : retrieve_history(q.object_id, q.limit)) out.push_back({std::move(r), 0.0});
    return out;
}

std::vector<MemoryRecord> MemoryStore::session_records(const std::string& object_id,
                                                       const std::string& session_id) const {
    Shelf& s = shelf(object_id);
    std::shared_lock lock(s.mutex);
    std::vector<MemoryRecord> out;
    for (const auto& r : s.records)
        if (r.session_id == session_id) out.push_back(r);
    return out;
}

std::size_t MemoryStore::count(const std::string& object_id) const {
    Shelf& s = shelf(object_id);
    std::shared_lock lock(s.mutex);
    return s.records.size();
}

MemoryRecord MemoryStore::summarize_session(const std::string& object_id, const std::string& session_id,
                                            const std::string& persona_name, ChatProvider& chat,
                                            EmbeddingProvider& embedder, const PromptTemplates& templates) {
    const auto records = session_records(object_id, session_id);
    if (records.empty()) throw std::invalid_argument("summarize_session: session has no turns");

    std::string transcript;
    for (const auto& r : records)
        transcript += (r.speaker == Speaker::Human ? std::string("Human") : persona_name) + ": " + r.text + "\n";

    ChatRequest req;
    req.schema = ResponseSchema::FreeText;
    req.system_prompt = render_template(templates.summary, {{"name", persona_name}, {"transcript", transcript}});
    req.messages.push_back({Role::User, "Summarize our conversation."});
    std::string summary = chat.chat(req);
    const auto b = summary.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) throw ProviderError(ProviderErrorKind::MalformedResponse, "blank summary");
    summary = summary.substr(b, summary.find_last_not_of(" \t\r\n") - b + 1);
    return store_memory(object_id, session_id, Speaker::Object, std::string(kSummaryPrefix) + summary, embedder);
}

}  // namespace portal
