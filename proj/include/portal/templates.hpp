#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace portal {

// Editable prompt texts. Defaults are the files under assets/prompts,
// compiled in; a templates directory can override any of them.
struct PromptTemplates {
    std::string persona;     // {description} {voices}
    std::string dialogue;    // {name} {traits} {speaking_style} {backstory} {mood_seed} {history} {relevant} {transcript}
    std::string corrective;
    std::string summary;     // {name} {transcript}
    std::string reflection;  // {name}

    static PromptTemplates defaults();
    // Files missing from `dir` keep their default text.
    static PromptTemplates load(const std::filesystem::path& dir);
};

// Replaces every {key} with its value; unknown placeholders are left as-is.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace portal
