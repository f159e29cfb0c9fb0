#include "portal/templates.hpp"

#include <fstream>
#include <sstream>

#include "default_templates.hpp"

namespace portal {

PromptTemplates PromptTemplates::defaults() {
    return {std::string(assets::kPersona), std::string(assets::kDialogue), std::string(assets::kCorrective),
            std::string(assets::kSummary), std::string(assets::kReflection)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    auto read = [&dir](const char* name, std::string& slot) {
        std::ifstream in(dir / name);
        if (!in) return;
        std::ostringstream ss;
        ss << in.rdbuf();
        slot = ss.str();
    };
    read("persona.txt", t.persona);
    read("dialogue.txt", t.dialogue);
    read("corrective.txt", t.corrective);
    read("summary.txt", t.summary);
    read("reflection.txt", t.reflection);
    return t;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string key(tmpl.substr(i + 1, close - i - 1));
                if (auto it = values.find(key); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace portal
