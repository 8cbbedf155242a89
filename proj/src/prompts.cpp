#include "ripple/prompts.hpp"

#include <stdexcept>

namespace ripple::prompts {

const std::string& get(const std::string& name) {
    const auto& table = all();
    const auto it = table.find(name);
    if (it == table.end()) throw std::out_of_range("unknown prompt template '" + name + "'");
    return it->second;
}

std::string render_text(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        const std::string key = text.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) throw std::invalid_argument("prompt placeholder '" + key + "' has no value");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string render(const std::string& name, const std::map<std::string, std::string>& values) {
    return render_text(get(name), values);
}

}  // namespace ripple::prompts
