// Profile-editor SUT speaking the local runtime's line protocol.

#include "ripple/mock_app.hpp"

#include <CLI/CLI.hpp>

#include <cstdio>
#include <iostream>
#include <regex>

int main(int argc, char** argv) {
    CLI::App cli{"ripple_mock_app"};
    std::string layout, profile, geometry = "1280x800";
    cli.add_option("--layout", layout, "layout.json of the build")->required();
    cli.add_option("--profile", profile, "profile directory");
    cli.add_option("--geometry", geometry, "display size WxH");
    CLI11_PARSE(cli, argc, argv);

    std::smatch m;
    if (!std::regex_match(geometry, m, std::regex(R"((\d+)x(\d+))"))) {
        std::cerr << "bad --geometry '" << geometry << "'\n";
        return 2;
    }
    try {
        ripple::DisplayGeometry display{std::stoi(m[1]), std::stoi(m[2])};
        auto app = ripple::mockapp::App::from_file(layout, profile, display);
        return ripple::mockapp::serve(app, std::cin, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "ripple_mock_app: " << e.what() << "\n";
        return 1;
    }
}
