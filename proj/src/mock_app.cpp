#include "ripple/mock_app.hpp"

#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/raster.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <thread>

namespace ripple::mockapp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Rgb kDesktop{40, 44, 52};
constexpr Rgb kInk{30, 30, 30};
constexpr Rgb kFieldBorder{128, 128, 128};
constexpr Rgb kFocusBorder{0, 120, 215};
constexpr Rgb kSelection{190, 215, 250};

Rgb rgb(const json& j, Rgb fallback) {
    if (!j.is_array() || j.size() != 3) return fallback;
    auto c = [&](std::size_t i) { return static_cast<std::uint8_t>(std::clamp(j[i].get<int>(), 0, 255)); };
    return {c(0), c(1), c(2)};
}

int to_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DriverError("not an integer: '" + s + "'");
    }
}

}  // namespace

App::App(const json& layout, fs::path profile_dir, DisplayGeometry display)
    : profile_dir_(std::move(profile_dir)), display_(display) {
    const json& win = layout.at("window");
    window_w_ = win.at("width").get<int>();
    window_h_ = win.at("height").get<int>();
    background_ = rgb(win.value("background", json()), background_);
    for (const auto& j : layout.at("widgets")) {
        Widget w;
        w.id = j.at("id").get<std::string>();
        w.type = j.at("type").get<std::string>();
        w.x = j.value("x", 0);
        w.y = j.value("y", 0);
        w.w = j.value("w", 0);
        w.h = j.value("h", 0);
        w.text = j.value("text", std::string{});
        w.color = rgb(j.value("color", json()), w.color);
        w.text_color = rgb(j.value("text_color", json()), w.text_color);
        w.on_click = j.value("on_click", json::object());
        if (w.type == "textfield") values_[w.id] = "";
        widgets_.push_back(std::move(w));
    }
    const fs::path saved = profile_dir_ / "profile.json";
    if (!profile_dir_.empty() && fs::exists(saved)) {
        const json profile = json::parse(read_file(saved));
        for (const auto& [k, v] : profile.items())
            if (values_.count(k) && v.is_string()) values_[k] = v.get<std::string>();
    }
}

App App::from_file(const fs::path& layout, fs::path profile_dir, DisplayGeometry display) {
    return App(json::parse(read_file(layout)), std::move(profile_dir), display);
}

std::string App::field_text(const std::string& id) const {
    auto it = values_.find(id);
    return it == values_.end() ? std::string{} : it->second;
}

std::string App::label_text(const std::string& id) const {
    if (auto it = labels_.find(id); it != labels_.end()) return it->second;
    for (const auto& w : widgets_)
        if (w.id == id) return w.text;
    return {};
}

const Widget* App::widget_at(int x, int y) const {
    if (x < 0 || y < 0 || x >= window_w_ || y >= window_h_) return nullptr;
    for (auto it = widgets_.rbegin(); it != widgets_.rend(); ++it)
        if (it->type != "label" && it->contains(x, y)) return &*it;
    return nullptr;
}

void App::execute(const std::vector<std::string>& argv) {
    if (argv.empty()) throw DriverError("empty command");
    const std::string tool = fs::path(argv[0]).filename().string();
    if (tool != "xdotool") throw DriverError("unsupported command '" + argv[0] + "'");
    xdotool({argv.begin() + 1, argv.end()});
}

void App::xdotool(const std::vector<std::string>& args) {
    std::size_t i = 0;
    auto need = [&](std::size_t n, const std::string& cmd) {
        if (i + n > args.size()) throw DriverError("xdotool " + cmd + ": missing argument");
    };
    while (i < args.size()) {
        const std::string cmd = args[i++];
        if (cmd == "mousemove") {
            while (i < args.size() && args[i].rfind("--", 0) == 0) i += args[i] == "--screen" ? 2 : 1;
            need(2, cmd);
            pointer_x_ = to_int(args[i]);
            pointer_y_ = to_int(args[i + 1]);
            i += 2;
        } else if (cmd == "click") {
            int repeat = 1;
            while (i < args.size() && args[i].rfind("--", 0) == 0) {
                need(2, cmd);
                if (args[i] == "--repeat") repeat = to_int(args[i + 1]);
                i += 2;
            }
            need(1, cmd);
            click(to_int(args[i++]), repeat);
        } else if (cmd == "mousedown" || cmd == "mouseup") {
            need(1, cmd);
            const int button = to_int(args[i++]);
            if (button != 1) continue;
            if (cmd == "mousedown") {
                pressed_at_ = std::pair{pointer_x_, pointer_y_};
            } else if (pressed_at_) {
                const Widget* down = widget_at(pressed_at_->first, pressed_at_->second);
                pressed_at_.reset();
                const Widget* up = widget_at(pointer_x_, pointer_y_);
                if (down && down == up) activate(*up);
            }
        } else if (cmd == "key") {
            while (i < args.size() && args[i].rfind("--", 0) == 0)
                i += (args[i] == "--delay" || args[i] == "--window" || args[i] == "--repeat") ? 2 : 1;
            need(1, cmd);
            while (i < args.size() && !(args[i] == "sleep" || args[i] == "mousemove" || args[i] == "click"))
                key(args[i++]);
        } else if (cmd == "type") {
            while (i < args.size() && args[i].rfind("--", 0) == 0) {
                if (args[i] == "--") {
                    ++i;
                    break;
                }
                i += 2;
            }
            std::string text;
            for (; i < args.size(); ++i) text += (text.empty() ? "" : " ") + args[i];
            type(text);
        } else if (cmd == "sleep") {
            need(1, cmd);
            double seconds = 0;
            try {
                seconds = std::stod(args[i++]);
            } catch (const std::exception&) {
                throw DriverError("xdotool sleep: bad duration");
            }
            std::this_thread::sleep_for(std::chrono::duration<double>(std::clamp(seconds, 0.0, 5.0)));
        } else {
            throw DriverError("xdotool: unsupported command '" + cmd + "'");
        }
    }
}

void App::click(int button, int repeat) {
    if (button != 1) return;  // context menus and wheel events have no effect here
    const Widget* w = widget_at(pointer_x_, pointer_y_);
    if (!w) {
        focus_.reset();
        selected_ = false;
        return;
    }
    if (w->type == "textfield") {
        focus_ = w->id;
        selected_ = repeat >= 2 && !values_[w->id].empty();
        return;
    }
    for (int r = 0; r < repeat; ++r) activate(*w);
}

void App::activate(const Widget& w) {
    if (w.type == "textfield") {
        focus_ = w.id;
        selected_ = false;
        return;
    }
    if (w.type != "button") return;
    focus_.reset();
    selected_ = false;
    if (const auto st = w.on_click.find("set_text"); st != w.on_click.end()) {
        std::string text = st->value("template", std::string{});
        for (const auto& [id, value] : values_) {
            const std::string key = "{" + id + "}";
            for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
                text.replace(pos, key.size(), value);
        }
        labels_[st->at("target").get<std::string>()] = text;
    }
    if (const auto wp = w.on_click.find("write_profile"); wp != w.on_click.end() && !profile_dir_.empty()) {
        json saved = json::object();
        for (const auto& id : *wp) saved[id.get<std::string>()] = field_text(id.get<std::string>());
        fs::create_directories(profile_dir_);
        write_file_atomic(profile_dir_ / "profile.json", saved.dump());
    }
}

void App::key(const std::string& sequence) {
    std::string lower = sequence;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "tab") {
        std::vector<std::string> fields;
        for (const auto& w : widgets_)
            if (w.type == "textfield") fields.push_back(w.id);
        if (fields.empty()) return;
        auto it = focus_ ? std::find(fields.begin(), fields.end(), *focus_) : fields.end();
        focus_ = (it == fields.end() || it + 1 == fields.end()) ? fields.front() : *(it + 1);
        selected_ = false;
        return;
    }
    if (!focus_) return;
    std::string& value = values_[*focus_];
    if (lower == "ctrl+a") {
        selected_ = !value.empty();
    } else if (lower == "backspace" || lower == "delete") {
        if (selected_) {
            value.clear();
        } else if (!value.empty()) {
            value.pop_back();
        }
        selected_ = false;
    } else if (lower == "escape") {
        focus_.reset();
        selected_ = false;
    } else if (sequence.size() == 1) {
        type(sequence);
    } else if (lower == "space") {
        type(" ");
    }
}

void App::type(const std::string& text) {
    if (!focus_) return;
    std::string& value = values_[*focus_];
    if (selected_) value.clear();
    selected_ = false;
    value += text;
}

Image App::render() const {
    Image img(display_.width, display_.height, kDesktop);
    raster::fill_rect(img, 0, 0, window_w_, window_h_, background_);
    for (const auto& w : widgets_) {
        if (w.type == "label") {
            raster::draw_text(img, w.x, w.y + (w.h - raster::text_height()) / 2, label_text(w.id), kInk);
        } else if (w.type == "textfield") {
            const bool focused = focus_ == w.id;
            raster::fill_rect(img, w.x, w.y, w.w, w.h, {255, 255, 255});
            raster::outline_rect(img, w.x, w.y, w.x + w.w, w.y + w.h, focused ? kFocusBorder : kFieldBorder);
            const std::string value = field_text(w.id);
            const int tx = w.x + 6, ty = w.y + (w.h - raster::text_height()) / 2;
            if (focused && selected_)
                raster::fill_rect(img, tx - 1, ty - 1, raster::text_width(value) + 2, raster::text_height() + 2,
                                  kSelection);
            raster::draw_text(img, tx, ty, value, kInk);
            if (focused && !selected_)
                raster::fill_rect(img, tx + raster::text_width(value) + 1, ty - 1, 1, raster::text_height() + 2, kInk);
        } else if (w.type == "button") {
            raster::fill_rect(img, w.x, w.y, w.w, w.h, w.color);
            raster::draw_text(img, w.x + (w.w - raster::text_width(w.text)) / 2, w.y + (w.h - raster::text_height()) / 2,
                              w.text, w.text_color);
        }
    }
    return img;
}

int serve(App& app, std::istream& in, std::ostream& out) {
    out << json{{"ready", true}}.dump() << std::endl;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        json reply = {{"ok", true}};
        try {
            const auto argv = json::parse(line).get<std::vector<std::string>>();
            if (!argv.empty() && argv[0] == "ripple-screenshot") {
                if (argv.size() != 2) throw DriverError("ripple-screenshot <path>");
                write_png(app.render(), argv[1]);
            } else {
                app.execute(argv);
            }
        } catch (const std::exception& e) {
            reply = {{"ok", false}, {"error", e.what()}};
        }
        out << reply.dump() << std::endl;
    }
    return 0;
}

}  // namespace ripple::mockapp
