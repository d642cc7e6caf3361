#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gaapo/domain.hpp"

namespace gaapo {

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` variables (name = [a-z_][a-z0-9_]*) in one pass; bound
/// values are not rescanned. Throws UnboundVariable for any unbound name.
std::string substitute(std::string_view template_text, const Bindings& bindings);

/// Meta-prompt templates keyed by id (file stem), e.g. "apo_edit" or
/// "mutation_concise_optimization".
class TemplateLibrary {
public:
    /// Templates compiled into the binary (templates/v1).
    static const TemplateLibrary& builtin();

    /// Built-ins overridden by every `<id>.txt` found in `dir`.
    static TemplateLibrary with_overrides(const std::filesystem::path& dir);

    [[nodiscard]] const std::string& get(std::string_view id) const;
    [[nodiscard]] bool contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }
    [[nodiscard]] std::string_view version() const { return version_; }

    /// Renders a template. `{placeholder}` is bound to the prompt placeholder
    /// unless the caller binds it.
    [[nodiscard]] std::string render(std::string_view id, const Bindings& bindings) const;

private:
    std::map<std::string, std::string, std::less<>> templates_;
    std::string version_ = "v1";
};

std::string mutation_template_id(MutationKind kind);

/// render_meta_prompt over the built-in library.
std::string render_meta_prompt(std::string_view template_id, const Bindings& bindings);

}  // namespace gaapo
