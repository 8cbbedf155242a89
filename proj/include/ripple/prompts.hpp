#pragma once

#include <map>
#include <string>

namespace ripple::prompts {

/// Every versioned template under prompts/, keyed by file stem (e.g. "generate_system.v1").
const std::map<std::string, std::string>& all();

/// Template text by name. Throws std::out_of_range for an unknown name.
const std::string& get(const std::string& name);

/// Substitutes every `{{key}}`. Throws std::invalid_argument if the template
/// references a key absent from `values`.
std::string render(const std::string& name, const std::map<std::string, std::string>& values);

std::string render_text(const std::string& text, const std::map<std::string, std::string>& values);

}  // namespace ripple::prompts
