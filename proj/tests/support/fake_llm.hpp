#pragma once

#include "ripple/config.hpp"
#include "ripple/llm.hpp"

#include <filesystem>

namespace ripple::testkit {

/// Every role served by the fake provider reading `script`.
inline llm::GatewayOptions fake_options(const std::filesystem::path& script) {
    llm::GatewayOptions o;
    for (Role r : kAllRoles) o.roles.roles[r] = ModelRole{"fake:" + script.string(), "", ""};
    o.settings.backoff_initial_ms = 1;
    return o;
}

}  // namespace ripple::testkit
