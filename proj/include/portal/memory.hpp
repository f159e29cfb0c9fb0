#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "portal/ids.hpp"
#include "portal/persistence.hpp"
#include "portal/providers.hpp"
#include "portal/templates.hpp"
#include "portal/types.hpp"

namespace portal {

struct ScoredMemory {
    MemoryRecord record;
    double score = 0.0;
};

struct MemoryQuery {
    enum class Mode { History, Search };

    Mode mode = Mode::History;
    std::string object_id;
    std::size_t limit = 10;
    std::string query_text;  // Search only

    void validate() const;
};

// Per-object episodic memory backed by append-only record files.
// Records for an object are loaded on first touch and kept in insertion
// order, which is also strictly increasing created_at order.
class MemoryStore {
public:
    using ObjectExists = std::function<bool(const std::string& object_id)>;

    MemoryStore(Store& store, Clock& clock, IdSource& ids, ObjectExists exists);

    MemoryRecord store_memory(const std::string& object_id, const std::string& session_id, Speaker speaker,
                              const std::string& text, EmbeddingProvider& embedder);

    // The `limit` most recent records, oldest first. Records of
    // `exclude_session` are skipped when it is non-empty.
    std::vector<MemoryRecord> retrieve_history(const std::string& object_id, std::size_t limit,
                                               const std::string& exclude_session = {}) const;

    // Top `limit` records by cosine similarity to embed(query_text);
    // equal scores rank the newer record first.
    std::vector<ScoredMemory> retrieve_relevant(const std::string& object_id, const std::string& query_text,
                                                std::size_t limit, EmbeddingProvider& embedder,
                                                const std::string& exclude_session = {}) const;

    std::vector<ScoredMemory> query(const MemoryQuery& q, EmbeddingProvider& embedder) const;

    // Condenses one session's records through a single chat call and
    // stores the result as an Object record prefixed "[summary] ".
    MemoryRecord summarize_session(const std::string& object_id, const std::string& session_id,
                                   const std::string& persona_name, ChatProvider& chat, EmbeddingProvider& embedder,
                                   const PromptTemplates& templates);

    std::vector<MemoryRecord> session_records(const std::string& object_id, const std::string& session_id) const;
    std::size_t count(const std::string& object_id) const;

private:
    struct Shelf {
        std::shared_mutex mutex;
        std::vector<MemoryRecord> records;
    };

    Shelf& shelf(const std::string& object_id) const;

    Store& store_;
    Clock& clock_;
    IdSource& ids_;
    ObjectExists exists_;
    mutable std::shared_mutex shelves_mutex_;
    mutable std::map<std::string, std::unique_ptr<Shelf>> shelves_;
};

}  // namespace portal
