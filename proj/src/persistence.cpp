#include "portal/persistence.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

namespace portal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UniqueFd {
public:
    explicit UniqueFd(int fd) : fd_(fd) {}
    ~UniqueFd() { reset(); }
    UniqueFd(const UniqueFd&) = delete;
    UniqueFd& operator=(const UniqueFd&) = delete;

    int get() const { return fd_; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_;
};

[[noreturn]] void throw_errno(const std::string& what, const fs::path& p) {
    throw StorageError(what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& p) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_errno("write", p);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    UniqueFd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC));
    if (fd.get() >= 0) ::fsync(fd.get());
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::vector<std::string> lines;
    if (!fs::exists(p)) return lines;
    std::ifstream in(p);
    if (!in) throw StorageError("cannot read " + p.string());
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void check_version(const json& j) {
    if (j.at("v").get<int>() != kRecordVersion)
        throw std::invalid_argument("unsupported record version " + j.at("v").dump());
}

void validate_profile(const ObjectProfile& p) {
    if (p.object_id.empty()) throw std::invalid_argument("profile: empty object_id");
    if (p.persona.name.empty()) throw std::invalid_argument("profile: empty persona name");
    if (p.persona.traits.size() < Persona::kMinTraits || p.persona.traits.size() > Persona::kMaxTraits)
        throw std::invalid_argument("profile: persona needs 3 to 7 traits");
    if (p.embedding.dim() == 0 || std::abs(p.embedding.norm() - 1.0) > 1e-5)
        throw std::invalid_argument("profile: embedding not L2-normalized");
    if (p.created_at > p.last_seen_at) throw std::invalid_argument("profile: created_at after last_seen_at");
}

std::string file_safe(std::string_view iso) {
    std::string s(iso);
    std::replace(s.begin(), s.end(), ':', '-');
    return s;
}

}  // namespace

StoreLayout StoreLayout::under(const fs::path& root) {
    return {root, root / "registry.jsonl", root / "memories", root / "sessions", root / "images"};
}

fs::path default_data_dir() {
    if (const char* env = std::getenv("PORTAL_DATA_DIR"); env && *env) return env;
    return "portal-data";
}

json embedding_to_json(const Embedding& e) {
    return {{"dim", e.dim()}, {"f32le_b64", base64_encode(pack_f32le(e.values))}};
}

Embedding embedding_from_json(const json& j) {
    Embedding e{unpack_f32le(base64_decode(j.at("f32le_b64").get<std::string>()))};
    if (e.dim() != j.at("dim").get<std::size_t>()) throw std::invalid_argument("embedding dim mismatch");
    return e;
}

json to_json(const Persona& p) {
    return {{"name", p.name},           {"traits", p.traits},       {"speaking_style", p.speaking_style},
            {"backstory", p.backstory}, {"voice_id", p.voice_id}, {"mood_seed", p.mood_seed}};
}

Persona persona_from_json(const json& j) {
    Persona p;
    p.name = j.at("name").get<std::string>();
    p.traits = j.at("traits").get<std::vector<std::string>>();
    p.speaking_style = j.at("speaking_style").get<std::string>();
    p.backstory = j.at("backstory").get<std::string>();
    p.voice_id = j.at("voice_id").get<std::string>();
    p.mood_seed = j.value("mood_seed", "");
    return p;
}

json to_json(const ObjectProfile& p) {
    return {{"v", kRecordVersion},
            {"object_id", p.object_id},
            {"description", p.description},
            {"persona", to_json(p.persona)},
            {"embedding", embedding_to_json(p.embedding)},
            {"created_at", to_iso8601(p.created_at)},
            {"last_seen_at", to_iso8601(p.last_seen_at)},
            {"image_refs", p.image_refs}};
}

ObjectProfile profile_from_json(const json& j) {
    check_version(j);
    ObjectProfile p;
    p.object_id = j.at("object_id").get<std::string>();
    p.description = j.at("description").get<std::string>();
    p.persona = persona_from_json(j.at("persona"));
    p.embedding = embedding_from_json(j.at("embedding"));
    p.created_at = parse_iso8601(j.at("created_at").get<std::string>());
    p.last_seen_at = parse_iso8601(j.at("last_seen_at").get<std::string>());
    p.image_refs = j.at("image_refs").get<std::vector<std::string>>();
    validate_profile(p);
    return p;
}

json to_json(const MemoryRecord& r) {
    return {{"v", kRecordVersion},
            {"memory_id", r.memory_id},
            {"object_id", r.object_id},
            {"session_id", r.session_id},
            {"speaker", to_string(r.speaker)},
            {"text", r.text},
            {"embedding", embedding_to_json(r.embedding)},
            {"created_at", to_iso8601(r.created_at)}};
}

MemoryRecord memory_from_json(const json& j) {
    check_version(j);
    MemoryRecord r;
    r.memory_id = j.at("memory_id").get<std::string>();
    r.object_id = j.at("object_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.speaker = speaker_from_string(j.at("speaker").get<std::string>());
    r.text = j.at("text").get<std::string>();
    r.embedding = embedding_from_json(j.at("embedding"));
    r.created_at = parse_iso8601(j.at("created_at").get<std::string>());
    if (r.text.empty()) throw std::invalid_argument("memory: empty text");
    return r;
}

json to_json(const SessionLog& s) {
    json transcript = json::array();
    for (const auto& e : s.transcript)
        transcript.push_back({{"speaker", to_string(e.speaker)},
                              {"kind", to_string(e.kind)},
                              {"text", e.text},
                              {"ts", to_iso8601(e.ts)}});
    json inner = json::array();
    for (const auto& t : s.inner_thoughts)
        inner.push_back({{"ts", to_iso8601(t.ts)},
                         {"inner_thoughts", t.inner_thoughts},
                         {"engagement_intent", t.engagement_intent},
                         {"speak", t.speak}});
    return {{"v", kRecordVersion},
            {"session_id", s.session_id},
            {"object_id", s.object_id},
            {"was_new", s.was_new},
            {"started_at", to_iso8601(s.started_at)},
            {"ended_at", to_iso8601(s.ended_at)},
            {"transcript", transcript},
            {"inner_thoughts", inner},
            {"summary_ref", s.summary_ref ? json(*s.summary_ref) : json(nullptr)},
            {"summary_skipped", s.summary_skipped}};
}

SessionLog session_log_from_json(const json& j) {
    check_version(j);
    SessionLog s;
    s.session_id = j.at("session_id").get<std::string>();
    s.object_id = j.at("object_id").get<std::string>();
    s.was_new = j.at("was_new").get<bool>();
    s.started_at = parse_iso8601(j.at("started_at").get<std::string>());
    s.ended_at = parse_iso8601(j.at("ended_at").get<std::string>());
    for (const auto& e : j.at("transcript"))
        s.transcript.push_back({speaker_from_string(e.at("speaker").get<std::string>()),
                                entry_kind_from_string(e.at("kind").get<std::string>()),
                                e.at("text").get<std::string>(), parse_iso8601(e.at("ts").get<std::string>())});
    for (const auto& t : j.at("inner_thoughts"))
        s.inner_thoughts.push_back({parse_iso8601(t.at("ts").get<std::string>()),
                                    t.at("inner_thoughts").get<std::string>(),
                                    t.at("engagement_intent").get<double>(), t.at("speak").get<bool>()});
    if (!j.at("summary_ref").is_null()) s.summary_ref = j.at("summary_ref").get<std::string>();
    s.summary_skipped = j.at("summary_skipped").get<bool>();
    return s;
}

Store::Store(StoreLayout layout) : layout_(std::move(layout)) {
    std::error_code ec;
    for (const auto& d : {layout_.root_dir, layout_.memories_dir, layout_.sessions_dir, layout_.images_dir}) {
        fs::create_directories(d, ec);
        if (ec) throw StorageError("cannot create " + d.string() + ": " + ec.message());
    }
}

void Store::fault(std::string_view point) const {
    if (fault_hook_) fault_hook_(point);
}

Loaded<ObjectProfile> Store::load_registry() const {
    std::lock_guard lock(registry_mutex_);
    Loaded<ObjectProfile> out;
    const auto lines = read_lines(layout_.registry_file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        try {
            ObjectProfile p = profile_from_json(json::parse(lines[i]));
            auto dup = std::find_if(out.items.begin(), out.items.end(),
                                    [&](const ObjectProfile& q) { return q.object_id == p.object_id; });
            if (dup != out.items.end()) {
                out.warnings.push_back("registry line " + std::to_string(i + 1) + ": duplicate object_id " +
                                       p.object_id + ", keeping the later record");
                *dup = std::move(p);
            } else {
                out.items.push_back(std::move(p));
            }
        } catch (const std::exception& e) {
            out.warnings.push_back("registry line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    for (const auto& w : out.warnings) spdlog::warn("skipping corrupt record: {}", w);
    return out;
}

void Store::save_profile(const ObjectProfile& profile) {
    validate_profile(profile);
    std::lock_guard lock(registry_mutex_);

    std::vector<std::string> lines;
    const std::string fresh = to_json(profile).dump();
    bool replaced = false;
    for (auto& line : read_lines(layout_.registry_file)) {
        if (blank(line)) continue;
        try {
            if (json::parse(line).at("object_id").get<std::string>() == profile.object_id) {
                if (!replaced) lines.push_back(fresh);
                replaced = true;
                continue;
            }
        } catch (const std::exception&) {
            // Unreadable lines are carried over untouched; load skips them.
        }
        lines.push_back(std::move(line));
    }
    if (!replaced) lines.push_back(fresh);

    const fs::path tmp = layout_.registry_file.string() + ".tmp";
    try {
        fault("registry.open_temp");
        UniqueFd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
        if (fd.get() < 0) throw_errno("open", tmp);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string_view line = lines[i];
            const std::size_t half = line.size() / 2;
            write_all(fd.get(), line.substr(0, half), tmp);
            fault("registry.partial:" + std::to_string(i));
            write_all(fd.get(), line.substr(half), tmp);
            write_all(fd.get(), "\n", tmp);
            fault("registry.write:" + std::to_string(i));
        }
        fault("registry.fsync");
        if (::fsync(fd.get()) != 0) throw_errno("fsync", tmp);
        fd.reset();
        fault("registry.rename");
        if (::rename(tmp.c_str(), layout_.registry_file.c_str()) != 0) throw_errno("rename", tmp);
        fault("registry.dir_fsync");
        fsync_dir(layout_.root_dir);
    } catch (const InjectedFault&) {
        throw;
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

void Store::write_new_file(const fs::path& path, std::string_view content, std::string_view point_prefix) {
    const fs::path tmp = path.string() + ".tmp";
    try {
        fault(std::string(point_prefix) + ".open_temp");
        UniqueFd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
        if (fd.get() < 0) throw_errno("open", tmp);
        write_all(fd.get(), content, tmp);
        fault(std::string(point_prefix) + ".fsync");
        if (::fsync(fd.get()) != 0) throw_errno("fsync", tmp);
        fd.reset();
        fault(std::string(point_prefix) + ".link");
        // link() fails if the target exists, so history is never overwritten.
        if (::link(tmp.c_str(), path.c_str()) != 0) throw_errno("link", path);
        ::unlink(tmp.c_str());
        fsync_dir(path.parent_path());
    } catch (const InjectedFault&) {
        throw;
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

std::string Store::archive_image(const std::string& object_id, std::span<const std::uint8_t> bytes,
                                 Timestamp ts, std::string_view mime_type) {
    if (object_id.empty() || object_id.find('/') != std::string::npos || object_id.find("..") != std::string::npos)
        throw std::invalid_argument("archive_image: bad object_id");
    const std::string ext = mime_type == "image/png" ? ".png" : ".jpg";
    std::lock_guard lock(files_mutex_);
    const fs::path dir = layout_.images_dir / object_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
    const std::string stem = file_safe(to_iso8601(ts));
    std::string name = stem + ext;
    for (int n = 1; fs::exists(dir / name); ++n) name = stem + "-" + std::to_string(n) + ext;
    write_new_file(dir / name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                   "image");
    return "images/" + object_id + "/" + name;
}

fs::path Store::resolve_ref(const std::string& ref) const {
    const fs::path rel(ref);
    if (rel.is_absolute() || !ref.starts_with("images/"))
        throw std::invalid_argument("not an image ref: " + ref);
    for (const auto& part : rel)
        if (part == "..") throw std::invalid_argument("not an image ref: " + ref);
    return layout_.root_dir / rel;
}

Bytes Store::read_image(const std::string& ref) const {
    const fs::path p = resolve_ref(ref);
    if (!fs::exists(p)) throw StorageError("missing image " + ref);
    return read_file_bytes(p.string());
}

void Store::remove_image(const std::string& ref) {
    std::error_code ec;
    fs::remove(resolve_ref(ref), ec);
}

void Store::append_memory(const MemoryRecord& record) {
    if (record.text.empty()) throw std::invalid_argument("append_memory: empty text");
    const std::string line = to_json(record).dump() + "\n";
    const fs::path p = layout_.memories_dir / (record.object_id + ".jsonl");
    std::lock_guard lock(memory_mutex_);
    fault("memory.open");
    UniqueFd fd(::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
    if (fd.get() < 0) throw_errno("open", p);
    write_all(fd.get(), line, p);
    fault("memory.fsync");
    if (::fsync(fd.get()) != 0) throw_errno("fsync", p);
}

Loaded<MemoryRecord> Store::load_memories(const std::string& object_id) const {
    std::lock_guard lock(memory_mutex_);
    Loaded<MemoryRecord> out;
    const fs::path p = layout_.memories_dir / (object_id + ".jsonl");
    const auto lines = read_lines(p);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        try {
            out.items.push_back(memory_from_json(json::parse(lines[i])));
        } catch (const std::exception& e) {
            out.warnings.push_back(p.filename().string() + " line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    for (const auto& w : out.warnings) spdlog::warn("skipping corrupt memory: {}", w);
    return out;
}

std::vector<std::string> Store::memory_object_ids() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(layout_.memories_dir))
        if (entry.path().extension() == ".jsonl") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

void Store::write_session_log(const SessionLog& log) {
    if (log.session_id.empty() || log.session_id.find('/') != std::string::npos)
        throw std::invalid_argument("write_session_log: bad session_id");
    const fs::path p = layout_.sessions_dir / (log.session_id + ".json");
    std::lock_guard lock(files_mutex_);
    if (fs::exists(p)) throw StorageError("session log already exists: " + log.session_id);
    write_new_file(p, to_json(log).dump(2) + "\n", "session");
}

std::string Store::session_log_text(const std::string& session_id) const {
    const fs::path p = layout_.sessions_dir / (session_id + ".json");
    std::ifstream in(p);
    if (!in) throw StorageError("missing session log " + session_id);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SessionLog Store::read_session_log(const std::string& session_id) const {
    try {
        return session_log_from_json(json::parse(session_log_text(session_id)));
    } catch (const StorageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StorageError("corrupt session log " + session_id + ": " + e.what());
    }
}

std::vector<std::string> Store::list_sessions() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(layout_.sessions_dir))
        if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace portal
