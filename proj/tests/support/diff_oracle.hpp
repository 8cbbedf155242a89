#pragma once

// Brute-force reference for the pixel-diff pipeline. Deliberately naive: no
// separability, no union-find, nothing shared with the library implementation.

#include "ripple/diff_engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <vector>

namespace ripple::testkit {

struct BruteMask {
    int width = 0, height = 0;
    std::vector<char> bits;
    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y * width + x)] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y * width + x)] = v ? 1 : 0; }
};

inline BruteMask brute_diff_mask(const Image& a, const Image& b, int threshold) {
    BruteMask m;
    m.width = std::max(a.width(), b.width());
    m.height = std::max(a.height(), b.height());
    m.bits.assign(static_cast<std::size_t>(m.width * m.height), 0);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!a.contains(x, y) || !b.contains(x, y)) {
                m.set(x, y, true);
                continue;
            }
            const Rgb p = a.at(x, y), q = b.at(x, y);
            const int d = std::max({std::abs(p.r - q.r), std::abs(p.g - q.g), std::abs(p.b - q.b)});
            m.set(x, y, d > threshold);
        }
    }
    return m;
}

inline BruteMask brute_dilate(const BruteMask& in, int radius) {
    BruteMask out = in;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            bool any = false;
            for (int dy = -radius; dy <= radius && !any; ++dy)
                for (int dx = -radius; dx <= radius && !any; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < in.width && ny < in.height && in.at(nx, ny)) any = true;
                }
            out.set(x, y, any);
        }
    return out;
}

inline std::vector<diff::DiffRegion> brute_regions(const BruteMask& grouping, const BruteMask& counted) {
    std::vector<int> comp(grouping.bits.size(), -1);
    std::vector<diff::DiffRegion> regions;
    for (int y = 0; y < grouping.height; ++y)
        for (int x = 0; x < grouping.width; ++x) {
            if (!grouping.at(x, y) || comp[static_cast<std::size_t>(y * grouping.width + x)] >= 0) continue;
            const int id = static_cast<int>(regions.size());
            diff::DiffRegion r;
            r.bbox = {x, y, x + 1, y + 1};
            std::deque<std::pair<int, int>> queue{{x, y}};
            comp[static_cast<std::size_t>(y * grouping.width + x)] = id;
            while (!queue.empty()) {
                auto [cx, cy] = queue.front();
                queue.pop_front();
                r.bbox.x1 = std::min(r.bbox.x1, cx);
                r.bbox.y1 = std::min(r.bbox.y1, cy);
                r.bbox.x2 = std::max(r.bbox.x2, cx + 1);
                r.bbox.y2 = std::max(r.bbox.y2, cy + 1);
                if (counted.at(cx, cy)) ++r.pixel_count;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= grouping.width || ny >= grouping.height) continue;
                        auto& c = comp[static_cast<std::size_t>(ny * grouping.width + nx)];
                        if (!grouping.at(nx, ny) || c >= 0) continue;
                        c = id;
                        queue.emplace_back(nx, ny);
                    }
            }
            regions.push_back(r);
        }
    // Merge any pair of overlapping boxes; repeat from scratch after every merge.
    bool again = true;
    while (again) {
        again = false;
        for (std::size_t i = 0; i < regions.size() && !again; ++i)
            for (std::size_t j = 0; j < regions.size() && !again; ++j) {
                if (i == j) continue;
                const auto& a = regions[i].bbox;
                const auto& b = regions[j].bbox;
                const bool overlap = a.x1 < b.x2 && b.x1 < a.x2 && a.y1 < b.y2 && b.y1 < a.y2;
                if (!overlap) continue;
                regions[i].bbox = {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
                                   std::max(a.y2, b.y2)};
                regions[i].pixel_count += regions[j].pixel_count;
                regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
                again = true;
            }
    }
    std::sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
        return a.bbox.y1 != b.bbox.y1 ? a.bbox.y1 < b.bbox.y1 : a.bbox.x1 < b.bbox.x1;
    });
    for (std::size_t i = 0; i < regions.size(); ++i) regions[i].index = static_cast<int>(i);
    return regions;
}

inline bool same_bits(const Mask& m, const BruteMask& b) {
    if (m.cols() != b.width || m.rows() != b.height) return false;
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x)
            if (m(y, x) != b.at(x, y)) return false;
    return true;
}

inline BruteMask to_brute(const Mask& m) {
    BruteMask b;
    b.width = static_cast<int>(m.cols());
    b.height = static_cast<int>(m.rows());
    b.bits.resize(static_cast<std::size_t>(b.width * b.height));
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) b.set(x, y, m(y, x));
    return b;
}

}  // namespace ripple::testkit
