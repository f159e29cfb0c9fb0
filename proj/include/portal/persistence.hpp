#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "portal/codec.hpp"
#include "portal/types.hpp"

namespace portal {

inline constexpr int kRecordVersion = 1;

class StorageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown by fault hooks to simulate a process dying at a write point.
// The store does no cleanup when it sees one, exactly like a real crash.
class InjectedFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using FaultHook = std::function<void(std::string_view point)>;

struct StoreLayout {
    std::filesystem::path root_dir;
    std::filesystem::path registry_file;
    std::filesystem::path memories_dir;
    std::filesystem::path sessions_dir;
    std::filesystem::path images_dir;

    static StoreLayout under(const std::filesystem::path& root);
};

// Record codecs. Embeddings are base64 of little-endian float32.
nlohmann::json to_json(const Persona& p);
Persona persona_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ObjectProfile& p);
ObjectProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MemoryRecord& r);
MemoryRecord memory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionLog& s);
SessionLog session_log_from_json(const nlohmann::json& j);
nlohmann::json embedding_to_json(const Embedding& e);
Embedding embedding_from_json(const nlohmann::json& j);

template <typename T>
struct Loaded {
    std::vector<T> items;
    std::vector<std::string> warnings;
};

// Plain directory tree of line-delimited JSON records:
//
//   <root>/registry.jsonl              one ObjectProfile per line
//   <root>/memories/<object_id>.jsonl  append-only MemoryRecords
//   <root>/sessions/<session_id>.json  one SessionLog, written once
//   <root>/images/<object_id>/<ts>.<ext>
//
// The registry is rewritten whole through write-temp-then-rename, so a
// crash at any point leaves either the old or the new file in place.
class Store {
public:
    explicit Store(StoreLayout layout);

    const StoreLayout& layout() const { return layout_; }
    void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

    Loaded<ObjectProfile> load_registry() const;
    void save_profile(const ObjectProfile& profile);  // upsert

    // Returns a ref relative to the root ("images/<id>/<file>").
    std::string archive_image(const std::string& object_id, std::span<const std::uint8_t> bytes,
                              Timestamp ts, std::string_view mime_type);
    Bytes read_image(const std::string& ref) const;
    void remove_image(const std::string& ref);

    void append_memory(const MemoryRecord& record);
    Loaded<MemoryRecord> load_memories(const std::string& object_id) const;
    std::vector<std::string> memory_object_ids() const;

    void write_session_log(const SessionLog& log);  // never overwrites
    SessionLog read_session_log(const std::string& session_id) const;
    std::string session_log_text(const std::string& session_id) const;
    std::vector<std::string> list_sessions() const;

private:
    void fault(std::string_view point) const;
    std::filesystem::path resolve_ref(const std::string& ref) const;
    void write_new_file(const std::filesystem::path& path, std::string_view content,
                        std::string_view point_prefix);

    StoreLayout layout_;
    FaultHook fault_hook_;
    mutable std::mutex registry_mutex_;
    mutable std::mutex memory_mutex_;
    mutable std::mutex files_mutex_;
};

// PORTAL_DATA_DIR, else ./portal-data.
std::filesystem::path default_data_dir();

}  // namespace portal
