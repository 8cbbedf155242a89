#pragma once

#include "ripple/timestamp.hpp"
#include "support/blame_oracle.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace ripple::testkit {

struct OracleIntent {
    std::string id;
    std::string created_at;
};

// Independent reading of the fixture: which intent each commit serves.
inline OracleIntent oracle_intent(const GitReader& reader, const std::string& commit) {
    const std::string subject = split_lines(reader.git({"log", "-1", "--format=%s", commit})).at(0);
    if (subject == "Add email field, refs #1") return {"1", "2023-12-20T08:00:00Z"};
    if (subject == "Add status label (#2)" || subject == "Bump build script revision (#2)")
        return {"2", "2023-12-21T08:00:00Z"};
    if (subject == "Add save and cancel buttons") return {"4", "2024-01-03T12:00:00Z"};
    if (subject == "Make cancel button grey (#5)") return {"5", "2024-01-05T09:00:00Z"};
    if (subject == "Widen name field (#6)") return {"6", "2024-01-07T08:00:00Z"};
    const std::string date = split_lines(reader.git({"log", "-1", "--format=%cI", commit})).at(0);
    return {"commit:" + commit.substr(0, 12), format_timestamp(parse_timestamp(date))};
}

struct Ranked {
    std::string id;
    long overlap;
    int rank;
    bool operator==(const Ranked&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Ranked& r) {
    return os << r.id << " x" << r.overlap << " #" << r.rank;
}

inline std::vector<Ranked> brute_preceding(const GitReader& reader, const std::string& from, const std::string& to) {
    std::map<std::string, std::pair<long, std::string>> counts;
    for (const std::string path : {"app/layout.json", "README.md", "build.sh"}) {
        const auto removed = removed_lines(reader.file_at(from, path), reader.file_at(to, path));
        const auto origins = reader.brute_blame(from, path);
        for (int line : removed) {
            const auto intent = oracle_intent(reader, origins.at(line - 1));
            auto& slot = counts[intent.id];
            ++slot.first;
            slot.second = intent.created_at;
        }
    }
    std::vector<std::tuple<long, std::string, std::string>> rows;
    for (const auto& [id, v] : counts) rows.emplace_back(v.first, v.second, id);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.push_back({std::get<2>(rows[i]), std::get<0>(rows[i]), static_cast<int>(i) + 1});
    return out;
}

}  // namespace ripple::testkit
