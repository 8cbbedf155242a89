#include "ripple/bug_filter.hpp"

#include "ripple/error.hpp"
#include "ripple/prompts.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <map>
#include <set>
#include <stdexcept>

namespace ripple::filter {

using nlohmann::json;
namespace fs = std::filesystem;
using oracle::BugReport;
using oracle::ReportStatus;

namespace {

const std::pair<Outcome, const char*> kOutcomeNames[] = {
    {Outcome::keep, "keep"},
    {Outcome::duplicate, "duplicate"},
    {Outcome::rendering_artifact, "rendering_artifact"},
    {Outcome::nondeterministic, "nondeterministic"},
};

ReportStatus status_of(Outcome o) {
    switch (o) {
        case Outcome::keep: return ReportStatus::kept;
        case Outcome::duplicate: return ReportStatus::filtered_duplicate;
        case Outcome::rendering_artifact: return ReportStatus::filtered_rendering;
        case Outcome::nondeterministic: return ReportStatus::filtered_nondeterminism;
    }
    return ReportStatus::kept;
}

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::string to_string(Outcome o) {
    for (const auto& [v, n] : kOutcomeNames)
        if (v == o) return n;
    return "keep";
}

Outcome outcome_from_string(const std::string& s) {
    for (const auto& [v, n] : kOutcomeNames)
        if (s == n) return v;
    if (s == "duplicate_of") return Outcome::duplicate;
    throw ParseError("unknown filter outcome: " + s);
}

bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t ie = i, je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            std::string da = a.substr(i, ie - i), db = b.substr(j, je - j);
            da.erase(0, std::min(da.find_first_not_of('0'), da.size()));
            db.erase(0, std::min(db.find_first_not_of('0'), db.size()));
            if (da.size() != db.size()) return da.size() < db.size();
            if (da != db) return da < db;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
    return a < b;
}

std::vector<FilterDecision> resolve_duplicates(std::vector<FilterDecision> decisions) {
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < decisions.size(); ++i) at[decisions[i].report_id] = i;
    UnionFind uf(decisions.size());
    std::vector<bool> grouped(decisions.size(), false);
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        if (d.outcome != Outcome::duplicate || !d.duplicate_of) continue;
        auto it = at.find(*d.duplicate_of);
        if (it == at.end() || it->second == i) continue;
        uf.unite(i, it->second);
        grouped[i] = grouped[it->second] = true;
    }
    std::map<std::size_t, std::size_t> representative;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (!grouped[i]) continue;
        const std::size_t root = uf.find(i);
        auto [it, fresh] = representative.emplace(root, i);
        if (!fresh && natural_less(decisions[i].report_id, decisions[it->second].report_id)) it->second = i;
    }
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (!grouped[i]) continue;
        auto& d = decisions[i];
        const std::size_t rep = representative.at(uf.find(i));
        if (rep == i) {
            if (d.outcome != Outcome::keep) d.flag = "kept as the representative of its duplicate group";
            d.outcome = Outcome::keep;
            d.duplicate_of.reset();
        } else {
            const std::string& to = decisions[rep].report_id;
            if (d.outcome != Outcome::duplicate || d.duplicate_of != to)
                d.flag = "redirected to the representative of its duplicate group";
            d.outcome = Outcome::duplicate;
            d.duplicate_of = to;
        }
    }
    return decisions;
}

FilterResult filter_reports(const std::vector<BugReport>& candidates, llm::Gateway& gateway,
                            const FilterOptions& options) {
    std::set<std::string> ids;
    for (const auto& c : candidates) {
        if (c.status != ReportStatus::candidate)
            throw std::invalid_argument("report " + c.report_id + " is not a candidate");
        if (!ids.insert(c.report_id).second) throw std::invalid_argument("report id " + c.report_id + " repeats");
    }
    FilterResult result;
    if (candidates.empty()) return result;

    json listing = json::array();
    std::vector<llm::ImageRef> images;
    std::string id_list;
    for (const auto& c : candidates) {
        json names = json::array();
        for (const auto& img : c.evidence_images) {
            const fs::path p = options.image_base.empty() ? fs::path(img) : options.image_base / img;
            images.push_back(llm::ImageRef::from_file(p));
            names.push_back(img);
        }
        listing.push_back({{"report_id", c.report_id},
                           {"scenario_id", c.scenario_id},
                           {"title", c.title},
                           {"description", c.description},
                           {"evidence", c.evidence},
                           {"images", names}});
        id_list += (id_list.empty() ? "" : ", ") + c.report_id;
    }
    const std::string label = (options.pr_id.empty() ? candidates.front().pr_id : options.pr_id) + "-filter";
    auto session = gateway.open_session(Role::filter, label);
    const std::string prompt = prompts::render(
        "user_filter", {{"pr_id", options.pr_id.empty() ? candidates.front().pr_id : options.pr_id},
                        {"reports", listing.dump(2)},
                        {"report_ids", id_list}});

    std::vector<FilterDecision> decisions;
    try {
        llm::ask_json(session, prompt, images, [&](const json& j, bool) {
            if (!j.is_object() || !j.contains("decisions") || !j["decisions"].is_array())
                throw LlmFormatError("reply needs a \"decisions\" list");
            std::map<std::string, FilterDecision> got;
            for (const auto& d : j["decisions"]) {
                if (!d.is_object() || !d.contains("report_id") || !d["report_id"].is_string())
                    throw LlmFormatError("each decision needs a string \"report_id\"");
                FilterDecision fd;
                fd.report_id = d["report_id"].get<std::string>();
                if (!ids.count(fd.report_id)) throw LlmFormatError("unknown report id " + fd.report_id);
                if (got.count(fd.report_id)) throw LlmFormatError("report " + fd.report_id + " decided twice");
                if (!d.contains("outcome") || !d["outcome"].is_string())
                    throw LlmFormatError("decision for " + fd.report_id + " needs a string \"outcome\"");
                try {
                    fd.outcome = outcome_from_string(d["outcome"].get<std::string>());
                } catch (const ParseError& e) {
                    throw LlmFormatError(e.what());
                }
                if (d.contains("duplicate_of") && !d["duplicate_of"].is_null()) {
                    if (!d["duplicate_of"].is_string()) throw LlmFormatError("\"duplicate_of\" must be a report id");
                    fd.duplicate_of = d["duplicate_of"].get<std::string>();
                }
                if (fd.outcome == Outcome::duplicate) {
                    if (!fd.duplicate_of || !ids.count(*fd.duplicate_of) || *fd.duplicate_of == fd.report_id)
                        throw LlmFormatError("duplicate " + fd.report_id + " must name another report in \"duplicate_of\"");
                } else {
                    fd.duplicate_of.reset();
                }
                if (d.contains("rationale") && d["rationale"].is_string()) fd.rationale = d["rationale"].get<std::string>();
                got.emplace(fd.report_id, std::move(fd));
            }
            for (const auto& c : candidates)
                if (!got.count(c.report_id)) throw LlmFormatError("no decision for report " + c.report_id);
            decisions.clear();
            for (const auto& c : candidates) decisions.push_back(got.at(c.report_id));
        });
    } catch (const LlmFormatError& e) {
        spdlog::warn("{}: keeping every candidate: {}", label, e.what());
        decisions.clear();
        for (const auto& c : candidates)
            decisions.push_back({c.report_id, Outcome::keep, std::nullopt, "", "filter reply unusable; kept by default"});
    }

    result.decisions = resolve_duplicates(std::move(decisions));
    result.reports = candidates;
    for (std::size_t i = 0; i < candidates.size(); ++i) result.reports[i].status = status_of(result.decisions[i].outcome);
    return result;
}

void to_json(json& j, const FilterDecision& v) {
    j = {{"report_id", v.report_id},
         {"outcome", to_string(v.outcome)},
         {"duplicate_of", v.duplicate_of ? json(*v.duplicate_of) : json()},
         {"rationale", v.rationale},
         {"flag", v.flag ? json(*v.flag) : json()}};
}

void from_json(const json& j, FilterDecision& v) {
    v.report_id = j.at("report_id").get<std::string>();
    v.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    v.duplicate_of = j.contains("duplicate_of") && !j["duplicate_of"].is_null()
                         ? std::optional(j["duplicate_of"].get<std::string>())
                         : std::nullopt;
    v.rationale = j.value("rationale", "");
    v.flag = j.contains("flag") && !j["flag"].is_null() ? std::optional(j["flag"].get<std::string>()) : std::nullopt;
}

void to_json(json& j, const FilterResult& v) { j = {{"reports", v.reports}, {"decisions", v.decisions}}; }

void from_json(const json& j, FilterResult& v) {
    v.reports = j.at("reports").get<std::vector<BugReport>>();
    v.decisions = j.at("decisions").get<std::vector<FilterDecision>>();
}

}  // namespace ripple::filter
