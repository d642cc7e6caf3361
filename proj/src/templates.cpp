#include "gaapo/templates.hpp"

#include <fstream>
#include <sstream>

#include "gaapo/error.hpp"

namespace gaapo {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbeddedTemplates[];
extern const std::size_t kEmbeddedTemplateCount;
}  // namespace detail

namespace {

bool is_var_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool is_var_char(char c) { return is_var_start(c) || (c >= '0' && c <= '9'); }

}  // namespace

std::string substitute(std::string_view template_text, const Bindings& bindings) {
    std::string out;
    out.reserve(template_text.size());
    std::size_t i = 0;
    while (i < template_text.size()) {
        const char c = template_text[i];
        if (c == '{' && i + 1 < template_text.size() && is_var_start(template_text[i + 1])) {
            std::size_t j = i + 1;
            while (j < template_text.size() && is_var_char(template_text[j])) ++j;
            if (j < template_text.size() && template_text[j] == '}') {
                const auto name = template_text.substr(i + 1, j - i - 1);
                const auto it = bindings.find(name);
                if (it == bindings.end())
                    throw Error(ErrorCode::UnboundVariable, "unbound template variable {" + std::string(name) + "}");
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

const TemplateLibrary& TemplateLibrary::builtin() {
    static const TemplateLibrary lib = [] {
        TemplateLibrary l;
        for (std::size_t i = 0; i < detail::kEmbeddedTemplateCount; ++i) {
            const auto& [id, text] = detail::kEmbeddedTemplates[i];
            l.templates_.emplace(std::string(id), std::string(text));
        }
        return l;
    }();
    return lib;
}

TemplateLibrary TemplateLibrary::with_overrides(const std::filesystem::path& dir) {
    TemplateLibrary lib = builtin();
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::ConfigError, "template directory not found: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        std::ostringstream ss;
        ss << in.rdbuf();
        lib.templates_[entry.path().stem().string()] = ss.str();
    }
    lib.version_ = dir.filename().string();
    return lib;
}

const std::string& TemplateLibrary::get(std::string_view id) const {
    const auto it = templates_.find(id);
    if (it == templates_.end()) throw Error(ErrorCode::UnknownTemplate, "unknown template '" + std::string(id) + "'");
    return it->second;
}

std::string TemplateLibrary::render(std::string_view id, const Bindings& bindings) const {
    const auto& text = get(id);
    if (bindings.find("placeholder") != bindings.end()) return substitute(text, bindings);
    Bindings with_placeholder = bindings;
    with_placeholder.emplace("placeholder", std::string(kPlaceholder));
    return substitute(text, with_placeholder);
}

std::string mutation_template_id(MutationKind kind) { return "mutation_" + std::string(to_string(kind)); }

std::string render_meta_prompt(std::string_view template_id, const Bindings& bindings) {
    return TemplateLibrary::builtin().render(template_id, bindings);
}

}  // namespace gaapo
