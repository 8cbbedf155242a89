#pragma once

#include "ripple/image.hpp"
#include "ripple/oracle.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ripple::testkit {

/// A candidate whose evidence image is written under `base` on first use.
inline oracle::BugReport filter_candidate(const std::filesystem::path& base, const std::string& id,
                                          const std::string& title, int step = 2) {
    oracle::BugReport r;
    r.report_id = id;
    r.pr_id = "7";
    r.scenario_id = id.substr(0, id.find('-'));
    r.title = title;
    r.description = title;
    r.evidence = {{step, 0}};
    const std::string img = r.scenario_id + "/step_" + std::to_string(step) + "_post.png";
    if (!std::filesystem::exists(base / img)) {
        std::filesystem::create_directories((base / img).parent_path());
        write_png(Image(8, 8, {static_cast<std::uint8_t>(id.size() * 9), 0, 0}), base / img);
    }
    r.evidence_images = {img};
    return r;
}

inline nlohmann::json filter_decision(const char* id, const char* outcome, const char* dup = nullptr) {
    return {{"report_id", id},
            {"outcome", outcome},
            {"duplicate_of", dup ? nlohmann::json(dup) : nlohmann::json()},
            {"rationale", "r"}};
}

struct TripleGroupFixture {
    std::vector<oracle::BugReport> candidates;
    /// Fake provider script answering the single filter request.
    nlohmann::json script;
};

/// Six candidates; S1-B02, S2-B01 and S3-B01 report the same problem, chained
/// S3-B01 -> S2-B01 -> S1-B02 in the model's reply.
inline TripleGroupFixture triple_group_fixture(const std::filesystem::path& base) {
    TripleGroupFixture f;
    f.candidates = {
        filter_candidate(base, "S1-B01", "Cancel button label is truncated"),
        filter_candidate(base, "S1-B02", "Saving does not update the status line"),
        filter_candidate(base, "S2-B01", "Status stays empty after Save"),
        filter_candidate(base, "S3-B01", "No confirmation after saving the profile"),
        filter_candidate(base, "S3-B02", "Text caret missing in the Name field"),
        filter_candidate(base, "S4-B01", "Fields swap order between runs"),
    };
    const nlohmann::json decisions = {
        filter_decision("S1-B01", "keep"),
        filter_decision("S1-B02", "keep"),
        filter_decision("S2-B01", "duplicate", "S1-B02"),
        filter_decision("S3-B01", "duplicate", "S2-B01"),
        filter_decision("S3-B02", "rendering_artifact"),
        filter_decision("S4-B01", "nondeterministic"),
    };
    f.script = nlohmann::json::array({{{"reply", {{"decisions", decisions}}}}});
    return f;
}

}  // namespace ripple::testkit
