#pragma once

#include "ripple/config.hpp"
#include "ripple/image.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

// The profile-editor SUT used by the fixtures: renders a layout.json into a
// virtual display and accepts the xdotool command subset the driver emits.
namespace ripple::mockapp {

struct Widget {
    std::string id;
    std::string type;  // label | textfield | button
    int x = 0, y = 0, w = 0, h = 0;
    std::string text;
    Rgb color{200, 200, 200};
    Rgb text_color{30, 30, 30};
    nlohmann::json on_click;

    bool contains(int px, int py) const { return px >= x && py >= y && px < x + w && py < y + h; }
};

class App {
public:
    /// Loads `<profile_dir>/profile.json` into the text fields when present.
    App(const nlohmann::json& layout, std::filesystem::path profile_dir, DisplayGeometry display);
    static App from_file(const std::filesystem::path& layout, std::filesystem::path profile_dir, DisplayGeometry display);

    /// One driver command line, e.g. {"xdotool", "mousemove", "10", "20", "click", "1"}.
    /// Throws DriverError for anything outside the supported subset.
    void execute(const std::vector<std::string>& argv);

    Image render() const;

    std::string field_text(const std::string& id) const;
    std::string label_text(const std::string& id) const;
    std::optional<std::string> focused() const { return focus_; }

private:
    void xdotool(const std::vector<std::string>& args);
    void click(int button, int repeat);
    void activate(const Widget& w);
    void key(const std::string& sequence);
    void type(const std::string& text);
    const Widget* widget_at(int x, int y) const;

    int window_w_ = 0, window_h_ = 0;
    Rgb background_{236, 236, 236};
    std::vector<Widget> widgets_;
    std::filesystem::path profile_dir_;
    DisplayGeometry display_;

    int pointer_x_ = 0, pointer_y_ = 0;
    std::optional<std::pair<int, int>> pressed_at_;
    std::optional<std::string> focus_;
    bool selected_ = false;
    std::map<std::string, std::string> values_;  // text fields
    std::map<std::string, std::string> labels_;  // overridden label texts
};

/// Line protocol: prints {"ready": true}, then answers every JSON argv line
/// with {"ok": true} or {"ok": false, "error": ...}. `["ripple-screenshot",
/// <path>]` writes the current display as PNG. Returns at EOF.
int serve(App& app, std::istream& in, std::ostream& out);

}  // namespace ripple::mockapp
