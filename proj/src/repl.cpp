#include "portal/repl.hpp"

#include <filesystem>
#include <mutex>
#include <sstream>

namespace portal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt_intent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Renders engine events as terminal lines.
class Printer {
public:
    Printer(std::ostream& out, bool show_inner) : out_(out), show_inner_(show_inner) {}

    void operator()(const EngineEvent& ev) {
        std::lock_guard lock(mutex_);
        const json& p = ev.payload;
        switch (ev.kind) {
            case ApiEventKind::PhaseChanged:
                out_ << "-- " << p.at("to").get<std::string>() << "\n";
                break;
            case ApiEventKind::ObjectBound:
                name_ = p.at("name").get<std::string>();
                out_ << (p.at("was_new").get<bool>() ? "-- first meeting: " : "-- welcome back: ") << name_ << " ("
                     << p.at("description").get<std::string>() << ")\n";
                break;
            case ApiEventKind::TranscriptAppended: {
                const std::string speaker = p.at("speaker").get<std::string>();
                const std::string kind = p.at("kind").get<std::string>();
                const std::string text = p.at("text").get<std::string>();
                if (speaker == "human") break;  // the user just typed it
                if (kind == "silence")
                    out_ << "(" << name_ << " stays silent)\n";
                else if (speaker == "object")
                    out_ << name_ << ": " << text << "\n";
                else
                    out_ << "portal: " << text << "\n";
                break;
            }
            case ApiEventKind::InnerThoughts:
                if (show_inner_)
                    out_ << "  [inner] " << p.at("inner_thoughts").get<std::string>() << " (intent "
                         << fmt_intent(p.at("engagement_intent").get<double>()) << ", "
                         << (p.at("speak").get<bool>() ? "speaks" : "silent") << ")\n";
                break;
            case ApiEventKind::SessionClosed:
                out_ << "-- session closed";
                if (p.at("aborted").get<bool>()) out_ << " (aborted: " << p.at("reason").get<std::string>() << ")";
                if (p.at("summary_skipped").get<bool>()) out_ << " (summary skipped)";
                out_ << "\n";
                name_ = "object";
                break;
            case ApiEventKind::LightSample:
                break;
        }
        out_.flush();
    }

private:
    std::mutex mutex_;
    std::ostream& out_;
    bool show_inner_;
    std::string name_ = "object";
};

void print_error(std::ostream& out, const CommandResult& r) {
    if (r.code == CommandResult::Code::Ok || r.code == CommandResult::Code::Failed) return;
    out << "error: " << r.error << "\n";
}

VisionRequest load_image(const PortalApp& app, const std::string& arg) {
    if (fs::is_regular_file(arg)) return vision_request_from_file(arg);
    return app.resolve_image_ref(arg);
}

}  // namespace

std::string repl_help() {
    return "commands:\n"
           "  awaken <image-file>   wake the portal and look at an object\n"
           "  say <text>            speak to the object\n"
           "  goodbye               end the session\n"
           "  objects               list known objects\n"
           "  memories <id> [query] show an object's memories (most recent, or by relevance)\n"
           "  help                  show this list\n"
           "  quit                  leave\n";
}

int run_repl(PortalApp& app, std::istream& in, std::ostream& out, const ReplOptions& options) {
    auto printer = std::make_shared<Printer>(out, options.show_inner);
    RitualEngine& engine = app.engine();
    const int listener = engine.add_listener([printer](const EngineEvent& ev) { (*printer)(ev); });
    struct Detach {
        RitualEngine& e;
        int id;
        ~Detach() { e.remove_listener(id); }
    } detach{engine, listener};

    std::string line;
    for (;;) {
        if (options.prompt) out << "> " << std::flush;
        if (!std::getline(in, line)) break;
        line = trim(line);
        if (line.empty() || line.starts_with('#')) continue;
        const auto space = line.find(' ');
        const std::string cmd = line.substr(0, space);
        const std::string arg = space == std::string::npos ? std::string() : trim(line.substr(space + 1));

        if (cmd == "quit" || cmd == "exit") break;
        if (cmd == "help") {
            out << repl_help();
        } else if (cmd == "awaken") {
            std::optional<VisionRequest> image;
            if (!arg.empty()) {
                try {
                    image = load_image(app, arg);
                } catch (const std::exception& e) {
                    out << "error: cannot read image " << arg << ": " << e.what() << "\n";
                    continue;
                }
            }
            const CommandResult r = engine.awaken(std::move(image));
            print_error(out, r);
        } else if (cmd == "say") {
            if (arg.empty()) {
                out << "error: say needs some text\n";
                continue;
            }
            print_error(out, engine.utterance(arg));
        } else if (cmd == "goodbye") {
            print_error(out, engine.goodbye());
        } else if (cmd == "objects") {
            const auto all = app.registry().all();
            if (all.empty()) out << "(none)\n";
            for (const auto& p : all)
                out << p.object_id << "  " << p.persona.name << "  " << p.description << "\n";
        } else if (cmd == "memories") {
            const auto sp = arg.find(' ');
            const std::string id = arg.substr(0, sp);
            const std::string query = sp == std::string::npos ? std::string() : trim(arg.substr(sp + 1));
            if (id.empty()) {
                out << "error: memories needs an object id\n";
                continue;
            }
            if (!app.registry().contains(id)) {
                out << "error: unknown object " << id << "\n";
                continue;
            }
            try {
                if (query.empty()) {
                    const auto records = app.memory().retrieve_history(id, 20);
                    if (records.empty()) out << "(none)\n";
                    for (const auto& r : records) out << "[" << to_string(r.speaker) << "] " << r.text << "\n";
                } else {
                    const auto hits = app.memory().retrieve_relevant(id, query, 10, *app.providers().embedding);
                    if (hits.empty()) out << "(none)\n";
                    for (const auto& h : hits) {
                        char score[16];
                        std::snprintf(score, sizeof score, "%.3f", h.score);
                        out << score << " [" << to_string(h.record.speaker) << "] " << h.record.text << "\n";
                    }
                }
            } catch (const std::exception& e) {
                out << "error: " << e.what() << "\n";
            }
        } else {
            out << "unknown command: " << cmd << "\n" << repl_help();
        }
        out.flush();
    }
    return 0;
}

}  // namespace portal
