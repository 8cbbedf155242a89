#pragma once

#include "ripple/skb.hpp"
#include "ripple/timestamp.hpp"

#include <random>
#include <string>
#include <vector>

namespace ripple::testkit {

inline skb::HistoricalReport report(std::string id, std::string title, std::string body, const std::string& created) {
    skb::HistoricalReport r;
    r.source_id = std::move(id);
    r.title = std::move(title);
    r.body = std::move(body);
    r.created_at = parse_timestamp(created);
    return r;
}

inline const std::vector<std::string> kVocab = {
    "open", "settings", "click", "search", "popup",  "window", "page",   "info",   "save",  "cancel",
    "type", "name",     "email", "profile", "button", "menu",  "scroll", "drag",   "tab",   "close",
    "password", "field", "dialog", "top",  "bar",    "select", "shortcut"};

inline std::string random_text(std::mt19937& rng, int min_words, int max_words) {
    std::uniform_int_distribution<int> len(min_words, max_words), pick(0, static_cast<int>(kVocab.size()) - 1),
        ws(0, 5);
    const char* seps[] = {" ", "  ", "\n", "\t", " \n ", "\n\n"};
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s += (i ? seps[ws(rng)] : "") + kVocab[static_cast<std::size_t>(pick(rng))];
    return s;
}

/// n reports with random words, created on random days of 2023 and 2024.
inline std::vector<skb::HistoricalReport> random_reports(std::mt19937& rng, int n) {
    std::vector<skb::HistoricalReport> out;
    std::uniform_int_distribution<long long> day(0, 729);
    for (int i = 0; i < n; ++i) {
        auto r = report("R" + std::to_string(100 + i), random_text(rng, 1, 6), random_text(rng, 0, 120), "2023-01-01");
        r.created_at = from_unix(1672531200LL + day(rng) * 86400 + i);
        out.push_back(std::move(r));
    }
    return out;
}

inline skb::BuildOptions small_chunks() {
    skb::BuildOptions b;
    b.chunk_tokens = 24;
    b.overlap_tokens = 6;
    b.backoff_initial_ms = 1;
    b.sleeper = [](std::chrono::milliseconds) {};
    return b;
}

}  // namespace ripple::testkit
