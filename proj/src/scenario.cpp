#include "ripple/scenario.hpp"

#include "ripple/error.hpp"
#include "ripple/prompts.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <regex>
#include <set>

namespace ripple::scenario {

using nlohmann::json;

std::string to_string(Stage s) {
    switch (s) {
        case Stage::generated: return "generated";
        case Stage::event_enriched: return "event_enriched";
        case Stage::data_enriched: return "data_enriched";
    }
    return "unknown";
}

Stage stage_from_string(const std::string& s) {
    for (auto st : {Stage::generated, Stage::event_enriched, Stage::data_enriched})
        if (to_string(st) == s) return st;
    throw ParseError("unknown scenario stage '" + s + "'");
}

std::vector<std::string> data_references(const std::string& text) {
    static const std::regex re(R"(\{data:([^{}]+)\})");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it)
        out.push_back((*it)[1]);
    return out;
}

std::vector<ScenarioStep> TestScenario::rendered_steps() const {
    std::map<std::string, std::string> values;
    for (const auto& d : test_data) values[d.name] = d.concrete_value;
    auto render = [&](std::string s) {
        for (const auto& [name, value] : values) {
            const std::string key = "{data:" + name + "}";
            for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
                s.replace(pos, key.size(), value);
        }
        return s;
    };
    std::vector<ScenarioStep> out;
    for (const auto& st : steps) {
        ScenarioStep r{render(st.description), std::nullopt};
        if (st.expected_observation) r.expected_observation = render(*st.expected_observation);
        out.push_back(std::move(r));
    }
    return out;
}

ScenarioBatch ScenarioBatch::make(std::string pr_id, ImpactAnalysis analysis, std::vector<TestScenario> scenarios,
                                  int max_scenarios) {
    if (max_scenarios >= 0 && scenarios.size() > static_cast<std::size_t>(max_scenarios)) {
        spdlog::info("PR {}: keeping the first {} of {} scenarios", pr_id, max_scenarios, scenarios.size());
        scenarios.resize(static_cast<std::size_t>(max_scenarios));
    }
    std::set<std::string> ids;
    for (const auto& s : scenarios) {
        if (!ids.insert(s.scenario_id).second) throw std::logic_error("duplicate scenario id " + s.scenario_id);
        if (s.steps.empty()) throw std::logic_error("scenario " + s.scenario_id + " has no steps");
    }
    return {std::move(pr_id), std::move(analysis), std::move(scenarios)};
}

PipelineOptions pipeline_options_from(const Config& config) {
    PipelineOptions o;
    o.max_scenarios = config.budgets.max_scenarios_per_pr;
    o.max_queries = config.skb.max_queries;
    o.k = config.skb.k;
    o.complexity_step_limit = config.generator.complexity_step_limit;
    o.max_preceding = config.generator.max_preceding_intents;
    return o;
}

// ---------------------------------------------------------------------------
// Lexical end-user check

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::optional<std::string> find_word(const std::string& text, const std::string& word) {
    for (auto pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
        const bool left = pos == 0 || !ident_char(text[pos - 1]);
        const bool right = pos + word.size() >= text.size() || !ident_char(text[pos + word.size()]);
        if (left && right) return word;
    }
    return std::nullopt;
}

bool looks_like_code(const std::string& w) {
    if (w.size() < 3 || std::isdigit(static_cast<unsigned char>(w[0]))) return false;
    if (w.find('_') != std::string::npos && w.find_first_not_of('_') != std::string::npos) return true;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (std::islower(static_cast<unsigned char>(w[i - 1])) && std::isupper(static_cast<unsigned char>(w[i])))
            return true;
    return false;
}

}  // namespace

CodeVocabulary CodeVocabulary::of(const change::CodeChange& change) {
    CodeVocabulary v;
    std::set<std::string> paths, idents;
    for (const auto& f : change.files) {
        if (!f.path.empty()) paths.insert(f.path);
        if (!f.old_path.empty()) paths.insert(f.old_path);
        std::size_t start = 0;
        while (start < f.patch.size()) {
            auto end = f.patch.find('\n', start);
            if (end == std::string::npos) end = f.patch.size();
            const std::string line = f.patch.substr(start, end - start);
            start = end + 1;
            if (line.empty() || (line[0] != '+' && line[0] != '-') || line.rfind("+++", 0) == 0 ||
                line.rfind("---", 0) == 0)
                continue;
            std::string word;
            for (char c : line.substr(1) + " ") {
                if (ident_char(c)) {
                    word += c;
                } else {
                    if (looks_like_code(word)) idents.insert(word);
                    word.clear();
                }
            }
        }
    }
    v.paths.assign(paths.begin(), paths.end());
    v.identifiers.assign(idents.begin(), idents.end());
    return v;
}

std::optional<std::string> CodeVocabulary::path_in(const std::string& text) const {
    for (const auto& p : paths)
        if (text.find(p) != std::string::npos) return p;
    return std::nullopt;
}

std::optional<std::string> CodeVocabulary::code_in(const std::string& text) const {
    if (auto p = path_in(text)) return p;
    for (const auto& id : identifiers)
        if (auto w = find_word(text, id)) return w;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reply parsing

namespace {

std::string require_string(const json& j, const char* key, const std::string& where, bool nonempty = true) {
    if (!j.contains(key) || !j[key].is_string()) throw LlmFormatError(where + ": \"" + key + "\" must be a string");
    std::string s = j[key].get<std::string>();
    if (nonempty && s.find_first_not_of(" \t\r\n") == std::string::npos)
        throw LlmFormatError(where + ": \"" + key + "\" is empty");
    return s;
}

std::optional<std::string> optional_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw LlmFormatError(where + ": \"" + key + "\" must be a string or null");
    return j[key].get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& where, bool required) {
    if (!j.contains(key) || j[key].is_null()) {
        if (required) throw LlmFormatError(where + ": missing \"" + key + "\"");
        return {};
    }
    if (!j[key].is_array()) throw LlmFormatError(where + ": \"" + key + "\" must be a list");
    std::vector<std::string> out;
    for (const auto& v : j[key]) {
        if (!v.is_string()) throw LlmFormatError(where + ": \"" + key + "\" must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

struct RawScenario {
    TestScenario scenario;
    std::optional<std::string> id;
    std::optional<std::string> replaces;
    std::vector<std::string> used_chunks;
};

// Shape checks shared by every stage. `value_key` is "value" or "concrete_value".
RawScenario parse_scenario(const json& j, std::size_t index, const char* value_key, bool value_required) {
    const std::string where = "test_scenarios[" + std::to_string(index) + "]";
    if (!j.is_object()) throw LlmFormatError(where + " must be an object");
    RawScenario r;
    r.id = optional_string(j, "scenario_id", where);
    r.replaces = optional_string(j, "replaces", where);
    r.used_chunks = string_list(j, "used_chunks", where, false);
    TestScenario& s = r.scenario;
    s.title = require_string(j, "title", where);
    s.preconditions = string_list(j, "preconditions", where, false);
    if (!j.contains("steps") || !j["steps"].is_array() || j["steps"].empty())
        throw LlmFormatError(where + ": \"steps\" must be a non-empty list");
    for (std::size_t i = 0; i < j["steps"].size(); ++i) {
        const json& st = j["steps"][i];
        const std::string sw = where + ".steps[" + std::to_string(i) + "]";
        if (st.is_string()) {
            s.steps.push_back({st.get<std::string>(), std::nullopt});
            continue;
        }
        if (!st.is_object()) throw LlmFormatError(sw + " must be an object");
        s.steps.push_back({require_string(st, "description", sw), optional_string(st, "expected_observation", sw)});
    }
    std::set<std::string> names;
    if (j.contains("test_data") && !j["test_data"].is_null()) {
        if (!j["test_data"].is_array()) throw LlmFormatError(where + ": \"test_data\" must be a list");
        for (std::size_t i = 0; i < j["test_data"].size(); ++i) {
            const json& d = j["test_data"][i];
            const std::string dw = where + ".test_data[" + std::to_string(i) + "]";
            if (!d.is_object()) throw LlmFormatError(dw + " must be an object");
            TestDatum datum;
            datum.name = require_string(d, "name", dw);
            datum.constraint = optional_string(d, "constraint", dw).value_or("");
            if (value_required) {
                datum.concrete_value = require_string(d, value_key, dw);
            } else {
                datum.concrete_value = optional_string(d, value_key, dw).value_or("");
            }
            if (!names.insert(datum.name).second) throw LlmFormatError(dw + ": duplicate test data name " + datum.name);
            s.test_data.push_back(std::move(datum));
        }
    }
    for (const auto& st : s.steps) {
        for (const auto& ref : data_references(st.description + " " + st.expected_observation.value_or("")))
            if (!names.count(ref)) throw LlmFormatError(where + ": a step refers to unknown test data '" + ref + "'");
    }
    return r;
}

/// Steps that mention a changed file path.
std::optional<std::string> path_violation(const TestScenario& s, const CodeVocabulary& vocab) {
    for (const auto& st : s.steps) {
        if (auto p = vocab.path_in(st.description)) return *p;
        if (st.expected_observation)
            if (auto p = vocab.path_in(*st.expected_observation)) return *p;
    }
    return std::nullopt;
}

/// One exchange with a single repair reprompt. `parse` receives the reply
/// JSON and whether this is the repaired (last) attempt.
template <typename T>
T ask(llm::Session& session, const std::string& prompt, const std::function<T(const json&, bool)>& parse) {
    std::string error;
    try {
        return parse(llm::extract_json(session.send(prompt).text()), false);
    } catch (const LlmFormatError& e) {
        error = e.what();
    } catch (const json::exception& e) {
        error = e.what();
    }
    spdlog::warn("{}: unusable reply ({}); asking for a repair", session.label(), error);
    try {
        return parse(llm::extract_json(session.send(prompts::render("user_repair", {{"error", error}})).text()), true);
    } catch (const json::exception& e) {
        throw LlmFormatError(session.label() + ": reply unusable after repair: " + e.what());
    } catch (const LlmFormatError& e) {
        throw LlmFormatError(session.label() + ": reply unusable after repair: " + e.what());
    }
}

std::string bullet_list(const std::vector<std::string>& items, const std::string& none = "(none)") {
    if (items.empty()) return none;
    std::string out;
    for (const auto& i : items) out += "- " + i + "\n";
    out.pop_back();
    return out;
}

std::string intent_block(const change::ChangeIntent& i) {
    std::string s = "#" + i.source_id + " " + i.title;
    if (!i.description.empty()) s += "\n  " + i.description;
    return s;
}

json scenarios_for_prompt(const std::vector<TestScenario>& list, const char* value_key) {
    json arr = json::array();
    for (const auto& s : list) {
        json steps = json::array();
        for (const auto& st : s.steps)
            steps.push_back({{"description", st.description},
                             {"expected_observation", st.expected_observation ? json(*st.expected_observation) : json()}});
        json data = json::array();
        for (const auto& d : s.test_data)
            data.push_back({{"name", d.name},
                            {"constraint", d.constraint},
                            {value_key, d.concrete_value.empty() ? json() : json(d.concrete_value)}});
        arr.push_back({{"scenario_id", s.scenario_id},
                       {"title", s.title},
                       {"preconditions", s.preconditions},
                       {"steps", steps},
                       {"test_data", data}});
    }
    return arr;
}

int id_number(const std::string& id) {
    if (id.size() < 2 || id[0] != 'S') return 0;
    try {
        return std::stoi(id.substr(1));
    } catch (const std::exception&) {
        return 0;
    }
}

class IdAllocator {
public:
    explicit IdAllocator(const std::vector<TestScenario>& existing) {
        for (const auto& s : existing) next_ = std::max(next_, id_number(s.scenario_id) + 1);
    }
    std::string fresh() { return "S" + std::to_string(next_++); }

private:
    int next_ = 1;
};

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1

ScenarioBatch generate_scenarios(const change::ChangeContext& ctx, llm::Gateway& gateway,
                                 const PipelineOptions& options) {
    const CodeVocabulary vocab = CodeVocabulary::of(ctx.code_change);

    std::vector<std::string> issues, commits, paths, preceding;
    for (const auto& i : ctx.resolved_issues) issues.push_back(intent_block(i));
    for (const auto& c : ctx.code_change.commit_messages) commits.push_back(c);
    std::string patches;
    for (const auto& f : ctx.code_change.files) {
        paths.push_back(f.old_path.empty() || f.old_path == f.path ? f.path : f.old_path + " -> " + f.path);
        patches += f.binary ? "Binary file " + f.path + " changed\n" : f.patch;
    }
    for (const auto& p : ctx.preceding) {
        if (static_cast<int>(preceding.size()) >= options.max_preceding) break;
        std::string line = "rank " + std::to_string(p.rank) + ", " + std::to_string(p.overlap_lines) +
                           " overlapping line(s): " + intent_block(p.intent);
        for (const auto& r : p.related) line += "\n  resolves " + intent_block(r);
        preceding.push_back(line);
    }
    const std::string prompt = prompts::render("user_generate", {{"pr_id", ctx.pr_id},
                                                                 {"pr_title", ctx.pr_intent.title},
                                                                 {"pr_description", ctx.pr_intent.description},
                                                                 {"resolved_issues", bullet_list(issues)},
                                                                 {"commit_messages", bullet_list(commits)},
                                                                 {"file_paths", bullet_list(paths)},
                                                                 {"patches", patches.empty() ? "(none)" : patches},
                                                                 {"preceding", bullet_list(preceding)},
                                                                 {"max_scenarios", std::to_string(options.max_scenarios)}});

    llm::Session session = gateway.open_session(Role::generator, ctx.pr_id + "-generate", prompts::get("system_generator"));
    std::function<ScenarioBatch(const json&, bool)> parse = [&](const json& j, bool last) {
        if (!j.is_object()) throw LlmFormatError("reply must be a JSON object");
        if (!j.contains("change_impact_analysis") || !j["change_impact_analysis"].is_object())
            throw LlmFormatError("missing \"change_impact_analysis\" object");
        const json& a = j["change_impact_analysis"];
        ImpactAnalysis analysis;
        analysis.intent_explanation = require_string(a, "intent_explanation", "change_impact_analysis");
        analysis.high_risk_cases = string_list(a, "high_risk_cases", "change_impact_analysis", false);
        for (auto& b : string_list(a, "affected_behaviors", "change_impact_analysis", true)) {
            if (auto code = vocab.code_in(b)) {
                if (!last) throw LlmFormatError("affected behavior '" + b + "' mentions code ('" + *code + "')");
                spdlog::warn("PR {}: dropping affected behavior that mentions code: {}", ctx.pr_id, b);
                continue;
            }
            analysis.affected_behaviors.push_back(std::move(b));
        }
        if (!j.contains("test_scenarios") || !j["test_scenarios"].is_array() || j["test_scenarios"].empty())
            throw LlmFormatError("\"test_scenarios\" must be a non-empty list");
        std::vector<TestScenario> scenarios;
        for (std::size_t i = 0; i < j["test_scenarios"].size(); ++i) {
            TestScenario s = parse_scenario(j["test_scenarios"][i], i, "value", false).scenario;
            if (auto p = path_violation(s, vocab)) {
                if (!last) throw LlmFormatError("scenario '" + s.title + "' mentions the file path " + *p);
                spdlog::warn("PR {}: dropping scenario '{}' that mentions {}", ctx.pr_id, s.title, *p);
                continue;
            }
            s.scenario_id = "S" + std::to_string(scenarios.size() + 1);
            s.stage = Stage::generated;
            scenarios.push_back(std::move(s));
        }
        if (scenarios.empty()) throw LlmFormatError("no usable test scenario");
        return ScenarioBatch::make(ctx.pr_id, std::move(analysis), std::move(scenarios), options.max_scenarios);
    };
    return ask(session, prompt, parse);
}

// ---------------------------------------------------------------------------
// Stage 2

ScenarioBatch enrich_event_sequences(const ScenarioBatch& batch, const skb::SkbIndex& index, llm::Gateway& gateway,
                                     Timestamp cutoff, const PipelineOptions& options, EnrichmentLog* log,
                                     const CodeVocabulary& vocab) {
    for (const auto& s : batch.scenarios)
        if (s.stage != Stage::generated) throw std::logic_error("event enrichment expects generated scenarios");
    EnrichmentLog local;
    EnrichmentLog& L = log ? *log : local;

    llm::Session session =
        gateway.open_session(Role::generator, batch.pr_id + "-event-enrich", prompts::get("system_event_enrichment"));

    json analysis = batch.analysis;
    const std::string query_prompt =
        prompts::render("user_event_queries", {{"intent_explanation", batch.analysis.intent_explanation},
                                               {"analysis", analysis.dump(2)},
                                               {"scenarios", scenarios_for_prompt(batch.scenarios, "value").dump(2)},
                                               {"max_queries", std::to_string(options.max_queries)}});
    std::function<std::vector<std::string>(const json&, bool)> parse_queries = [&](const json& j, bool) {
        if (!j.is_object()) throw LlmFormatError("reply must be a JSON object");
        std::vector<std::string> out;
        for (auto q : string_list(j, "queries", "reply", true)) {
            q.erase(0, q.find_first_not_of(" \t\r\n"));
            q.erase(q.find_last_not_of(" \t\r\n") + 1);
            if (q.empty() || std::find(out.begin(), out.end(), q) != out.end()) continue;
            out.push_back(q);
        }
        if (static_cast<int>(out.size()) > options.max_queries) out.resize(static_cast<std::size_t>(options.max_queries));
        return out;
    };
    const auto queries = ask(session, query_prompt, parse_queries);

    std::vector<skb::RetrievalResult> knowledge;
    std::set<std::string> retrieved;
    for (const auto& q : queries) {
        const auto results = index.query(q, gateway, cutoff, options.k);
        skb::assert_predates(results, cutoff);
        EnrichmentLog::Query entry{q, {}};
        for (const auto& r : results) {
            entry.chunk_ids.push_back(r.chunk.chunk_id);
            if (retrieved.insert(r.chunk.chunk_id).second) knowledge.push_back(r);
        }
        L.queries.push_back(std::move(entry));
    }
    std::string knowledge_text;
    for (const auto& r : knowledge)
        knowledge_text += "[" + r.chunk.chunk_id + "] from report " + r.chunk.source_id + ":\n" + r.chunk.text + "\n\n";
    if (knowledge_text.empty()) knowledge_text = "No knowledge was retrieved; keep the scenarios as they are where no other event sequence is evident.";

    std::map<std::string, const TestScenario*> by_id;
    for (const auto& s : batch.scenarios) by_id[s.scenario_id] = &s;

    auto provenance_of = [&](const std::vector<std::string>& used, const std::string& title) {
        std::vector<std::string> out;
        for (const auto& c : used) {
            if (!retrieved.count(c)) {
                L.warnings.push_back("scenario '" + title + "' cites chunk " + c + " that no query returned");
                continue;
            }
            if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
        }
        return out;
    };

    std::function<std::vector<RawScenario>(const json&, bool)> parse_scenarios = [&](const json& j, bool last) {
        if (!j.is_object() || !j.contains("test_scenarios") || !j["test_scenarios"].is_array())
            throw LlmFormatError("reply must hold a \"test_scenarios\" list");
        std::vector<RawScenario> out;
        for (std::size_t i = 0; i < j["test_scenarios"].size(); ++i) {
            RawScenario r = parse_scenario(j["test_scenarios"][i], i, "value", false);
            if (r.id && by_id.count(*r.id)) {
                const TestScenario& old = *by_id.at(*r.id);
                if (r.scenario.steps.size() < old.steps.size() || r.scenario.preconditions.size() < old.preconditions.size())
                    throw LlmFormatError("scenario " + *r.id + " lost steps or preconditions during enrichment");
            }
            if (auto p = path_violation(r.scenario, vocab)) {
                if (!last) throw LlmFormatError("scenario '" + r.scenario.title + "' mentions the file path " + *p);
                L.warnings.push_back("dropped scenario '" + r.scenario.title + "' mentioning " + *p);
                continue;
            }
            out.push_back(std::move(r));
        }
        return out;
    };

    const auto enriched = ask(session,
                              prompts::render("user_event_enrich", {{"knowledge", knowledge_text},
                                                                    {"step_limit", std::to_string(options.complexity_step_limit)}}),
                              parse_scenarios);

    // Assemble: existing scenarios keep their slot, new ones are appended.
    IdAllocator ids(batch.scenarios);
    std::vector<std::optional<TestScenario>> slots;
    std::map<std::string, std::size_t> slot_of;
    for (const auto& s : batch.scenarios) {
        slot_of[s.scenario_id] = slots.size();
        TestScenario carried = s;
        carried.stage = Stage::event_enriched;
        slots.emplace_back(std::move(carried));
    }
    std::vector<TestScenario> added;
    std::vector<std::pair<std::string, RawScenario>> too_complex;
    const auto limit = static_cast<std::size_t>(std::max(1, options.complexity_step_limit));

    auto accept_new = [&](RawScenario r, const std::optional<std::string>& replaces) {
        if (r.scenario.steps.size() > limit) {
            L.warnings.push_back("dropped new scenario '" + r.scenario.title + "' with " +
                                 std::to_string(r.scenario.steps.size()) + " steps");
            return;
        }
        TestScenario s = std::move(r.scenario);
        s.scenario_id = ids.fresh();
        s.stage = Stage::event_enriched;
        s.provenance = provenance_of(r.used_chunks, s.title);
        if (replaces && slot_of.count(*replaces) && slots[slot_of.at(*replaces)]) {
            L.replacements.emplace_back(*replaces, s.scenario_id);
            slots[slot_of.at(*replaces)] = std::move(s);
            slot_of.erase(*replaces);
        } else {
            added.push_back(std::move(s));
        }
    };

    for (auto& r : enriched) {
        if (r.id && slot_of.count(*r.id)) {
            if (r.scenario.steps.size() > limit) {
                too_complex.emplace_back(*r.id, std::move(r));
                continue;
            }
            TestScenario s = std::move(r.scenario);
            s.scenario_id = *r.id;
            s.stage = Stage::event_enriched;
            s.provenance = provenance_of(r.used_chunks, s.title);
            slots[slot_of.at(*r.id)] = std::move(s);
        } else {
            if (r.id) L.warnings.push_back("unknown scenario id " + *r.id + " treated as a new scenario");
            const auto replaces = r.replaces;
            accept_new(std::move(r), replaces);
        }
    }

    for (auto& [id, rejected] : too_complex) {
        L.rejected_extensions.push_back(id);
        const std::string prompt = prompts::render(
            "user_event_replace", {{"scenario_id", id},
                                   {"step_count", std::to_string(rejected.scenario.steps.size())},
                                   {"step_limit", std::to_string(options.complexity_step_limit)},
                                   {"rejected", scenarios_for_prompt({rejected.scenario}, "value").dump(2)}});
        for (auto& r : ask(session, prompt, parse_scenarios)) {
            if (r.id && slot_of.count(*r.id)) {
                L.warnings.push_back("replacement reply re-used id " + *r.id + "; treated as new");
            }
            accept_new(std::move(r), std::nullopt);
        }
    }

    std::vector<TestScenario> out;
    for (auto& s : slots)
        if (s) out.push_back(std::move(*s));
    for (auto& s : added) out.push_back(std::move(s));
    for (const auto& w : L.warnings) spdlog::warn("PR {}: {}", batch.pr_id, w);
    return ScenarioBatch::make(batch.pr_id, batch.analysis, std::move(out), options.max_scenarios);
}

// ---------------------------------------------------------------------------
// Stage 3

ScenarioBatch enrich_test_data(const ScenarioBatch& batch, llm::Gateway& gateway, const PipelineOptions& options,
                               const CodeVocabulary& vocab) {
    for (const auto& s : batch.scenarios)
        if (s.stage != Stage::event_enriched) throw std::logic_error("test data enrichment expects event-enriched scenarios");
    if (batch.scenarios.empty()) return batch;

    llm::Session session =
        gateway.open_session(Role::generator, batch.pr_id + "-data-enrich", prompts::get("system_data_enrichment"));
    const std::string prompt =
        prompts::render("user_data_enrich", {{"scenarios", scenarios_for_prompt(batch.scenarios, "value").dump(2)}});
    const auto limit = static_cast<std::size_t>(std::max(1, options.complexity_step_limit));

    std::function<std::vector<TestScenario>(const json&, bool)> parse = [&](const json& j, bool) {
        if (!j.is_object() || !j.contains("test_scenarios") || !j["test_scenarios"].is_array())
            throw LlmFormatError("reply must hold a \"test_scenarios\" list");
        std::map<std::string, TestScenario> got;
        for (std::size_t i = 0; i < j["test_scenarios"].size(); ++i) {
            RawScenario r = parse_scenario(j["test_scenarios"][i], i, "concrete_value", true);
            if (!r.id) throw LlmFormatError("test_scenarios[" + std::to_string(i) + "] has no scenario_id");
            const auto old = std::find_if(batch.scenarios.begin(), batch.scenarios.end(),
                                          [&](const TestScenario& s) { return s.scenario_id == *r.id; });
            if (old == batch.scenarios.end()) throw LlmFormatError("unknown scenario_id " + *r.id);
            if (got.count(*r.id)) throw LlmFormatError("scenario_id " + *r.id + " appears twice");
            if (r.scenario.steps.size() < old->steps.size() || r.scenario.preconditions.size() < old->preconditions.size())
                throw LlmFormatError("scenario " + *r.id + " lost steps or preconditions");
            if (r.scenario.steps.size() > limit)
                throw LlmFormatError("scenario " + *r.id + " exceeds " + std::to_string(limit) + " steps");
            if (auto p = path_violation(r.scenario, vocab))
                throw LlmFormatError("scenario " + *r.id + " mentions the file path " + *p);
            r.scenario.scenario_id = *r.id;
            r.scenario.stage = Stage::data_enriched;
            r.scenario.provenance = old->provenance;
            got.emplace(*r.id, std::move(r.scenario));
        }
        std::vector<TestScenario> out;
        std::vector<std::string> missing;
        for (const auto& s : batch.scenarios) {
            if (auto it = got.find(s.scenario_id); it != got.end()) {
                out.push_back(std::move(it->second));
                continue;
            }
            bool needs_data = !s.test_data.empty();
            for (const auto& st : s.steps) needs_data = needs_data || !data_references(st.description).empty();
            if (needs_data) {
                missing.push_back(s.scenario_id);
                continue;
            }
            TestScenario carried = s;
            carried.stage = Stage::data_enriched;
            out.push_back(std::move(carried));
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw LlmFormatError("scenarios needing test data were not returned: " + list);
        }
        return out;
    };
    auto scenarios = ask(session, prompt, parse);
    return ScenarioBatch::make(batch.pr_id, batch.analysis, std::move(scenarios), options.max_scenarios);
}

// ---------------------------------------------------------------------------

void to_json(json& j, const ImpactAnalysis& v) {
    j = {{"intent_explanation", v.intent_explanation},
         {"affected_behaviors", v.affected_behaviors},
         {"high_risk_cases", v.high_risk_cases}};
}

void from_json(const json& j, ImpactAnalysis& v) {
    v.intent_explanation = j.at("intent_explanation").get<std::string>();
    v.affected_behaviors = j.at("affected_behaviors").get<std::vector<std::string>>();
    v.high_risk_cases = j.value("high_risk_cases", std::vector<std::string>{});
}

void to_json(json& j, const TestScenario& v) {
    json steps = json::array(), data = json::array();
    for (const auto& s : v.steps)
        steps.push_back({{"description", s.description},
                         {"expected_observation", s.expected_observation ? json(*s.expected_observation) : json()}});
    for (const auto& d : v.test_data)
        data.push_back({{"name", d.name}, {"constraint", d.constraint}, {"concrete_value", d.concrete_value}});
    j = {{"scenario_id", v.scenario_id}, {"title", v.title},     {"stage", to_string(v.stage)},
         {"preconditions", v.preconditions}, {"steps", steps}, {"test_data", data},
         {"provenance", v.provenance}};
}

void from_json(const json& j, TestScenario& v) {
    v.scenario_id = j.at("scenario_id").get<std::string>();
    v.title = j.at("title").get<std::string>();
    v.stage = stage_from_string(j.at("stage").get<std::string>());
    v.preconditions = j.value("preconditions", std::vector<std::string>{});
    v.steps.clear();
    for (const auto& s : j.at("steps")) {
        ScenarioStep st{s.at("description").get<std::string>(), std::nullopt};
        if (s.contains("expected_observation") && s["expected_observation"].is_string())
            st.expected_observation = s["expected_observation"].get<std::string>();
        v.steps.push_back(std::move(st));
    }
    v.test_data.clear();
    for (const auto& d : j.value("test_data", json::array()))
        v.test_data.push_back({d.at("name").get<std::string>(), d.value("constraint", std::string{}),
                               d.value("concrete_value", std::string{})});
    v.provenance = j.value("provenance", std::vector<std::string>{});
}

void to_json(json& j, const ScenarioBatch& v) {
    j = {{"pr_id", v.pr_id}, {"analysis", v.analysis}, {"scenarios", v.scenarios}};
}

void from_json(const json& j, ScenarioBatch& v) {
    v.pr_id = j.at("pr_id").get<std::string>();
    v.analysis = j.at("analysis").get<ImpactAnalysis>();
    v.scenarios = j.at("scenarios").get<std::vector<TestScenario>>();
}

json to_json(const EnrichmentLog& log) {
    json q = json::array();
    for (const auto& e : log.queries) q.push_back({{"query", e.text}, {"chunk_ids", e.chunk_ids}});
    json rep = json::array();
    for (const auto& [a, b] : log.replacements) rep.push_back({{"replaced", a}, {"by", b}});
    return {{"queries", q},
            {"rejected_extensions", log.rejected_extensions},
            {"replacements", rep},
            {"warnings", log.warnings}};
}

}  // namespace ripple::scenario
