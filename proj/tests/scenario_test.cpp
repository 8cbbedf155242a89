#include "ripple/error.hpp"
#include "ripple/scenario.hpp"

#include "support/fake_llm.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace ripple;
using namespace ripple::scenario;
using nlohmann::json;

namespace {

const char* kPatch =
    "diff --git a/app/layout.json b/app/layout.json\n"
    "--- a/app/layout.json\n"
    "+++ b/app/layout.json\n"
    "@@ -10,1 +10,1 @@\n"
    "-    {\"id\": \"save\", \"type\": \"button\", \"x\": 520, \"on_click\": {\"set_text\": {}}},\n"
    "+    {\"id\": \"save\", \"type\": \"button\", \"x\": 280, \"text_color\": [255, 255, 255]},\n";

change::ChangeContext context() {
    change::ChangeContext c;
    c.pr_id = "7";
    c.pr_intent = {"7", "Restyle the Save button", "Fixes #3", parse_timestamp("2024-02-01T10:00:00Z")};
    c.resolved_issues = {{"3", "Restyle the Save button", "Make it green", parse_timestamp("2024-01-20")}};
    change::FileChange f;
    f.path = f.old_path = "app/layout.json";
    f.patch = kPatch;
    f.old_ranges = f.new_ranges = {{10, 10}};
    c.code_change.files = {f};
    c.code_change.commit_messages = {"Move save button\n\nCloser to the form"};
    return c;
}

json step(const std::string& d, const std::string& expect = "") {
    return {{"description", d}, {"expected_observation", expect.empty() ? json() : json(expect)}};
}

json make_scenario(const std::string& title, std::vector<json> steps, json data = json::array(), json id = json()) {
    json s = {{"title", title}, {"preconditions", {"The profile editor is open"}}, {"steps", steps}, {"test_data", data}};
    if (!id.is_null()) s["scenario_id"] = id;
    return s;
}

json analysis(std::vector<std::string> behaviors = {"Saving the profile", "Cancelling an edit"}) {
    return {{"intent_explanation", "The Save button gets a new place and colour."},
            {"affected_behaviors", behaviors},
            {"high_risk_cases", {"Saving with an empty name"}}};
}

json three_scenarios() {
    return json::array({
        make_scenario("Save a profile",
                      {step("Type {data:name} into the Name field"), step("Click Save", "The status shows SAVED")},
                      json::array({{{"name", "name"}, {"constraint", "a person name"}, {"value", nullptr}}})),
        make_scenario("Cancel an edit", {step("Type x into Email"), step("Click Cancel", "Nothing is saved")}),
        make_scenario("Save twice", {step("Click Save"), step("Click Save", "The status is unchanged")}),
    });
}

json generate_reply(json scenarios, json a = analysis()) {
    return {{"change_impact_analysis", a}, {"test_scenarios", scenarios}};
}

struct Harness {
    testkit::TempDir dir;
    std::unique_ptr<llm::Gateway> gw;
    void script(const json& records) {
        gw = std::make_unique<llm::Gateway>(testkit::fake_options(dir.write("script.json", records.dump())));
    }
    long requests() const { return gw->meter().snapshot().at(Role::generator).requests; }
};

ScenarioBatch generated_batch(Harness& h) {
    h.script(json::array({{{"match", "Produce the change impact analysis"}, {"reply", generate_reply(three_scenarios())}}}));
    return generate_scenarios(context(), *h.gw);
}

}  // namespace

TEST(Generate, ParsesScenariosInEmittedOrder) {
    Harness h;
    // Matching on the rendered title proves the PR context reaches the prompt.
    h.script(json::array({{{"match", "PR 7: Restyle the Save button"}, {"reply", generate_reply(three_scenarios())}}}));
    const auto b = generate_scenarios(context(), *h.gw);
    EXPECT_EQ(h.requests(), 1);
    EXPECT_EQ(b.pr_id, "7");
    EXPECT_EQ(b.analysis.affected_behaviors, (std::vector<std::string>{"Saving the profile", "Cancelling an edit"}));
    ASSERT_EQ(b.scenarios.size(), 3u);
    const std::vector<std::string> ids = {"S1", "S2", "S3"}, titles = {"Save a profile", "Cancel an edit", "Save twice"};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(b.scenarios[i].scenario_id, ids[i]);
        EXPECT_EQ(b.scenarios[i].title, titles[i]);
        EXPECT_EQ(b.scenarios[i].stage, Stage::generated);
        EXPECT_TRUE(b.scenarios[i].provenance.empty());
    }
    ASSERT_EQ(b.scenarios[0].test_data.size(), 1u);
    EXPECT_EQ(b.scenarios[0].test_data[0].name, "name");
    EXPECT_EQ(b.scenarios[0].test_data[0].concrete_value, "");
    EXPECT_EQ(b.scenarios[0].steps[1].expected_observation, "The status shows SAVED");
    EXPECT_FALSE(b.scenarios[0].steps[0].expected_observation);
}

TEST(Generate, KeepsFirstSevenOfTwelve) {
    Harness h;
    json many = json::array();
    for (int i = 1; i <= 12; ++i) many.push_back(make_scenario("T" + std::to_string(i), {step("Click Save")}));
    h.script(json::array({{{"reply", generate_reply(many)}}}));
    const auto b = generate_scenarios(context(), *h.gw);
    ASSERT_EQ(b.scenarios.size(), 7u);
    for (int i = 0; i < 7; ++i) {
        EXPECT_EQ(b.scenarios[i].title, "T" + std::to_string(i + 1));
        EXPECT_EQ(b.scenarios[i].scenario_id, "S" + std::to_string(i + 1));
    }
}

TEST(Generate, RepairsOnceThenFails) {
    Harness h;
    h.script(json::array({{{"match", "Produce the change"}, {"reply", "Here are some ideas, no JSON."}},
                          {{"match", "could not be used"}, {"reply", "Still prose."}}}));
    EXPECT_THROW(generate_scenarios(context(), *h.gw), LlmFormatError);
    EXPECT_EQ(h.requests(), 2);

    Harness ok;
    ok.script(json::array({{{"match", "Produce the change"}, {"reply", {{"test_scenarios", "nope"}}}},
                           {{"match", "could not be used"}, {"reply", generate_reply(three_scenarios())}}}));
    EXPECT_EQ(generate_scenarios(context(), *ok.gw).scenarios.size(), 3u);
    EXPECT_EQ(ok.requests(), 2);
}

TEST(Generate, RejectsStructuralProblems) {
    const std::vector<json> bad = {
        generate_reply(json::array()),
        generate_reply(json::array({make_scenario("No steps", std::vector<json>{})})),
        generate_reply(json::array({make_scenario("Unknown data", {step("Type {data:email}")})})),
        generate_reply(three_scenarios(), {{"intent_explanation", ""}, {"affected_behaviors", json::array()}}),
        {{"test_scenarios", three_scenarios()}},
    };
    for (const auto& reply : bad) {
        Harness h;
        h.script(json::array({{{"reply", reply}}, {{"reply", reply}}}));
        EXPECT_THROW(generate_scenarios(context(), *h.gw), LlmFormatError) << reply.dump();
    }
}

TEST(Generate, LexicalCheckRepairsThenDrops) {
    const CodeVocabulary v = CodeVocabulary::of(context().code_change);
    EXPECT_EQ(v.paths, (std::vector<std::string>{"app/layout.json"}));
    EXPECT_EQ(v.identifiers, (std::vector<std::string>{"on_click", "set_text", "text_color"}));
    EXPECT_EQ(v.code_in("the text_color is white"), "text_color");
    EXPECT_FALSE(v.code_in("the text colour is white"));
    EXPECT_FALSE(v.code_in("my_text_colors"));

    json leaky = three_scenarios();
    leaky.push_back(make_scenario("Leaky", {step("Open app/layout.json and inspect the save entry")}));

    // A clean repair is used as is.
    Harness h;
    h.script(json::array({{{"match", "Produce"}, {"reply", generate_reply(leaky)}},
                          {{"match", "could not be used"}, {"reply", generate_reply(three_scenarios())}}}));
    EXPECT_EQ(generate_scenarios(context(), *h.gw).scenarios.size(), 3u);
    EXPECT_EQ(h.requests(), 2);

    // A repair that still leaks loses the offending scenario and behavior.
    Harness d;
    const json reply = generate_reply(leaky, analysis({"Saving the profile", "Changing on_click handling"}));
    d.script(json::array({{{"match", "Produce"}, {"reply", reply}}, {{"match", "could not be used"}, {"reply", reply}}}));
    const auto b = generate_scenarios(context(), *d.gw);
    ASSERT_EQ(b.scenarios.size(), 3u);
    for (const auto& s : b.scenarios) EXPECT_NE(s.title, "Leaky");
    EXPECT_EQ(b.analysis.affected_behaviors, (std::vector<std::string>{"Saving the profile"}));
}

namespace {

skb::SkbIndex popup_index(llm::Gateway& gw) {
    auto r = [](std::string id, std::string title, std::string body, const char* at) {
        skb::HistoricalReport h;
        h.source_id = std::move(id);
        h.title = std::move(title);
        h.body = std::move(body);
        h.created_at = parse_timestamp(at);
        return h;
    };
    std::vector<skb::HistoricalReport> reports = {
        r("P1", "Settings popup", "Right click the window to open the popup menu and choose Settings", "2023-06-01"),
        r("P2", "Settings popup shortcut", "Open the popup menu with a shortcut and choose Settings", "2024-03-01"),
        r("P3", "Scrolling", "Scroll the page down with the wheel", "2023-07-01"),
    };
    skb::BuildOptions o;
    o.sleeper = [](std::chrono::milliseconds) {};
    return skb::build_index(reports, gw, o);
}

const Timestamp kCutoff = parse_timestamp("2024-02-01T10:00:00Z");

}  // namespace

TEST(EventEnrichment, EmptyIndexEchoesScenarios) {
    Harness h;
    auto batch = generated_batch(h);
    h.script(json::array({{{"match", "search queries"}, {"reply", {{"queries", {"open settings", "open settings", " "}}}}},
                          {{"match", "No knowledge was retrieved"}, {"reply", {{"test_scenarios", json::array()}}}}}));
    EnrichmentLog log;
    const auto out = enrich_event_sequences(batch, skb::SkbIndex{}, *h.gw, kCutoff, {}, &log);
    ASSERT_EQ(out.scenarios.size(), batch.scenarios.size());
    for (std::size_t i = 0; i < out.scenarios.size(); ++i) {
        auto expect = batch.scenarios[i];
        expect.stage = Stage::event_enriched;
        EXPECT_EQ(out.scenarios[i], expect);
    }
    ASSERT_EQ(log.queries.size(), 1u);
    EXPECT_EQ(log.queries[0].text, "open settings");
    EXPECT_TRUE(log.queries[0].chunk_ids.empty());
    EXPECT_THROW(enrich_event_sequences(out, skb::SkbIndex{}, *h.gw, kCutoff), std::logic_error);
}

TEST(EventEnrichment, PopupKnowledgeExtendsScenarioWithProvenance) {
    Harness h;
    auto batch = generated_batch(h);
    json enriched = three_scenarios();
    enriched[0]["scenario_id"] = "S1";
    enriched[0]["steps"].insert(enriched[0]["steps"].begin(),
                                {step("Right click the window and open Settings from the popup menu")});
    enriched[0]["used_chunks"] = {"P1#0", "P2#0", "BOGUS#0"};
    json extra = make_scenario("Save from popup settings", {step("Open Settings via the popup menu"), step("Click Save")});
    extra["scenario_id"] = nullptr;
    extra["used_chunks"] = {"P1#0"};
    h.script(json::array({{{"match", "search queries"}, {"reply", {{"queries", {"open settings from the popup menu"}}}}},
                          {{"match", "Right click the window to open the popup menu"},
                           {"reply", {{"test_scenarios", {enriched[0], extra}}}}}}));
    EnrichmentLog log;
    const auto out = enrich_event_sequences(batch, popup_index(*h.gw), *h.gw, kCutoff, {}, &log);

    ASSERT_EQ(out.scenarios.size(), 4u);
    EXPECT_EQ(out.scenarios[0].scenario_id, "S1");
    EXPECT_EQ(out.scenarios[0].steps.size(), 3u);
    EXPECT_EQ(out.scenarios[0].provenance, (std::vector<std::string>{"P1#0"}));
    EXPECT_EQ(out.scenarios[3].scenario_id, "S4");
    EXPECT_EQ(out.scenarios[3].provenance, (std::vector<std::string>{"P1#0"}));
    for (const auto& s : out.scenarios) EXPECT_EQ(s.stage, Stage::event_enriched);

    std::set<std::string> logged;
    for (const auto& q : log.queries) logged.insert(q.chunk_ids.begin(), q.chunk_ids.end());
    EXPECT_TRUE(logged.count("P1#0"));
    EXPECT_FALSE(logged.count("P2#0"));
    for (const auto& s : out.scenarios)
        for (const auto& c : s.provenance) EXPECT_TRUE(logged.count(c)) << c;
    EXPECT_EQ(log.warnings.size(), 2u);
}

TEST(EventEnrichment, OverlongExtensionIsReplacedBySeparateScenario) {
    Harness h;
    auto batch = generated_batch(h);
    json enriched = three_scenarios();
    std::vector<json> long_steps;
    for (int i = 0; i < 16; ++i) long_steps.push_back(step("Press Tab " + std::to_string(i)));
    json s2 = make_scenario("Cancel an edit", long_steps, json::array(), "S2");
    json s3_new = make_scenario("Save twice quickly", {step("Double click Save")});
    s3_new["scenario_id"] = nullptr;
    s3_new["replaces"] = "S3";
    h.script(json::array(
        {{{"match", "search queries"}, {"reply", {{"queries", json::array()}}}},
         {{"match", "Integrate the retrieved knowledge"}, {"reply", {{"test_scenarios", {s2, s3_new}}}}},
         {{"match", "became too complex"},
          {"reply", {{"test_scenarios", {make_scenario("Cancel after tabbing", {step("Press Tab"), step("Click Cancel")})}}}}}}));
    EnrichmentLog log;
    const auto out = enrich_event_sequences(batch, skb::SkbIndex{}, *h.gw, kCutoff, {}, &log);

    std::vector<std::string> ids;
    for (const auto& s : out.scenarios) ids.push_back(s.scenario_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"S1", "S2", "S4", "S5"}));
    EXPECT_EQ(out.scenarios[1].steps, batch.scenarios[1].steps);
    EXPECT_EQ(out.scenarios[2].title, "Save twice quickly");
    EXPECT_EQ(out.scenarios[3].title, "Cancel after tabbing");
    EXPECT_EQ(log.rejected_extensions, (std::vector<std::string>{"S2"}));
    ASSERT_EQ(log.replacements.size(), 1u);
    EXPECT_EQ(log.replacements[0], (std::pair<std::string, std::string>{"S3", "S4"}));
    for (const auto& s : out.scenarios) EXPECT_LE(s.steps.size(), 15u);
}

TEST(EventEnrichment, NeverExceedsScenarioCap) {
    Harness h;
    auto batch = generated_batch(h);
    json fresh = json::array();
    for (int i = 0; i < 9; ++i) fresh.push_back(make_scenario("New " + std::to_string(i), {step("Click Save")}));
    h.script(json::array({{{"match", "search queries"}, {"reply", {{"queries", json::array()}}}},
                          {{"match", "Integrate"}, {"reply", {{"test_scenarios", fresh}}}}}));
    const auto out = enrich_event_sequences(batch, skb::SkbIndex{}, *h.gw, kCutoff);
    ASSERT_EQ(out.scenarios.size(), 7u);
    EXPECT_EQ(out.scenarios[2].scenario_id, "S3");
    EXPECT_EQ(out.scenarios[6].title, "New 3");
}

namespace {

ScenarioBatch event_batch(Harness& h) {
    auto batch = generated_batch(h);
    h.script(json::array({{{"match", "search queries"}, {"reply", {{"queries", json::array()}}}},
                          {{"match", "Integrate"}, {"reply", {{"test_scenarios", json::array()}}}}}));
    return enrich_event_sequences(batch, skb::SkbIndex{}, *h.gw, kCutoff);
}

json data_reply(bool include_s2, const std::string& value) {
    json s1 = make_scenario("Save a profile",
                       {step("Type {data:name} into the Name field"), step("Click Save", "The status shows SAVED {data:name}")},
                       json::array({{{"name", "name"}, {"constraint", "a person name"}, {"concrete_value", value}}}), "S1");
    json s2 = make_scenario("Cancel an edit",
                       {step("Type {data:email} into Email"), step("Click Cancel", "Nothing is saved")},
                       json::array({{{"name", "email"}, {"constraint", "valid address"}, {"concrete_value", "a@b.io"}}}),
                       "S2");
    json list = json::array({s1});
    if (include_s2) list.push_back(s2);
    return {{"test_scenarios", list}};
}

}  // namespace

TEST(DataEnrichment, InstantiatesValuesAndCarriesDataFreeScenarios) {
    Harness h;
    auto batch = event_batch(h);
    h.script(json::array({{{"match", "Identify and instantiate the test data"}, {"reply", data_reply(true, "Ada")}}}));
    const auto out = enrich_test_data(batch, *h.gw);
    ASSERT_EQ(out.scenarios.size(), 3u);
    for (const auto& s : out.scenarios) EXPECT_EQ(s.stage, Stage::data_enriched);
    const auto r = out.scenarios[0].rendered_steps();
    EXPECT_EQ(r[0].description, "Type Ada into the Name field");
    EXPECT_EQ(r[1].expected_observation, "The status shows SAVED Ada");
    EXPECT_EQ(out.scenarios[1].rendered_steps()[0].description, "Type a@b.io into Email");
    // S3 needs no data and was not returned.
    EXPECT_EQ(out.scenarios[2].steps, batch.scenarios[2].steps);
    EXPECT_EQ(out.scenarios[2].scenario_id, "S3");
    for (const auto& s : out.scenarios)
        for (const auto& st : s.rendered_steps()) EXPECT_TRUE(data_references(st.description).empty());
}

TEST(DataEnrichment, MissingOrEmptyValuesAreRepairedOrFail) {
    {
        Harness h;
        auto batch = event_batch(h);
        h.script(json::array({{{"match", "Identify"}, {"reply", data_reply(true, "")}},
                              {{"match", "could not be used"}, {"reply", data_reply(true, "Grace")}}}));
        const auto out = enrich_test_data(batch, *h.gw);
        EXPECT_EQ(out.scenarios[0].test_data[0].concrete_value, "Grace");
    }
    {
        // S1 carries a {data:name} placeholder; leaving it out is an error.
        Harness h;
        auto batch = event_batch(h);
        json only_s3 = {{"test_scenarios", json::array({make_scenario("Save twice", {step("Click Save"), step("Click Save")},
                                                                 json::array(), "S3")})}};
        h.script(json::array({{{"reply", only_s3}}, {{"reply", only_s3}}}));
        EXPECT_THROW(enrich_test_data(batch, *h.gw), LlmFormatError);
    }
    {
        Harness h;
        auto batch = event_batch(h);
        json unknown = data_reply(true, "Ada");
        unknown["test_scenarios"][1]["scenario_id"] = "S9";
        h.script(json::array({{{"reply", unknown}}, {{"reply", unknown}}}));
        EXPECT_THROW(enrich_test_data(batch, *h.gw), LlmFormatError);
    }
    {
        Harness h;
        auto batch = generated_batch(h);
        EXPECT_THROW(enrich_test_data(batch, *h.gw), std::logic_error);
    }
}

TEST(Batch, JsonRoundTrip) {
    Harness h;
    auto batch = event_batch(h);
    batch.scenarios[0].provenance = {"P1#0"};
    const json j = batch;
    EXPECT_EQ(j.at("scenarios")[0].at("stage"), "event_enriched");
    EXPECT_EQ(j.get<ScenarioBatch>(), batch);
    EXPECT_EQ(data_references("a {data:x} b {data:y z} {data:}"), (std::vector<std::string>{"x", "y z"}));
}
