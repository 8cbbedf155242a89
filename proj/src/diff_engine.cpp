#include "ripple/diff_engine.hpp"

#include "ripple/raster.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace ripple::diff {

MaskResult diff_mask(const Image& a, const Image& b, int threshold) {
    const int w = std::max(a.width(), b.width());
    const int h = std::max(a.height(), b.height());
    const int cw = std::min(a.width(), b.width());
    const int ch = std::min(a.height(), b.height());
    MaskResult result;
    result.dimension_mismatch = a.width() != b.width() || a.height() != b.height();
    result.mask = Mask::Constant(h, w, true);
    if (cw == 0 || ch == 0) return result;

    Mask common = Mask::Constant(ch, cw, false);
    for (int c = 0; c < 3; ++c) {
        common = common || exceeds_threshold(a.channel(c).topLeftCorner(ch, cw), b.channel(c).topLeftCorner(ch, cw),
                                             threshold);
    }
    result.mask.topLeftCorner(ch, cw) = common;
    return result;
}

namespace {

// One-dimensional running-window dilation along rows of `in`.
Mask dilate_rows(const Mask& in, int radius) {
    const Eigen::Index rows = in.rows(), cols = in.cols();
    Mask out = Mask::Constant(rows, cols, false);
    std::vector<int> prefix(static_cast<std::size_t>(cols) + 1);
    for (Eigen::Index y = 0; y < rows; ++y) {
        prefix[0] = 0;
        for (Eigen::Index x = 0; x < cols; ++x) prefix[static_cast<std::size_t>(x) + 1] = prefix[x] + (in(y, x) ? 1 : 0);
        for (Eigen::Index x = 0; x < cols; ++x) {
            const auto lo = static_cast<std::size_t>(std::max<Eigen::Index>(0, x - radius));
            const auto hi = static_cast<std::size_t>(std::min<Eigen::Index>(cols, x + radius + 1));
            out(y, x) = prefix[hi] - prefix[lo] > 0;
        }
    }
    return out;
}

class DisjointSet {
public:
    int make() {
        parent_.push_back(static_cast<int>(parent_.size()));
        return parent_.back();
    }
    int find(int x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            auto& p = parent_[static_cast<std::size_t>(x)];
            p = parent_[static_cast<std::size_t>(p)];
            x = p;
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }

private:
    std::vector<int> parent_;
};

struct Accum {
    BBox box{};
    long count = 0;
    bool seen = false;
};

}  // namespace

Mask dilate(const Mask& mask, int radius) {
    if (radius <= 0 || mask.size() == 0) return mask;
    // The square element is separable: dilate rows, then columns.
    const Mask horizontal = dilate_rows(mask, radius);
    const Mask transposed = horizontal.transpose();
    return dilate_rows(transposed, radius).transpose();
}

std::vector<DiffRegion> extract_regions(const Mask& mask) { return extract_regions(mask, mask); }

std::vector<DiffRegion> extract_regions(const Mask& grouping, const Mask& counted) {
    const int h = static_cast<int>(grouping.rows());
    const int w = static_cast<int>(grouping.cols());
    Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels =
        Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(h, w, -1);
    DisjointSet sets;

    // First pass: provisional labels from the four already-visited 8-neighbours.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!grouping(y, x)) continue;
            int label = -1;
            const int nbr[4][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}};
            for (const auto& d : nbr) {
                const int nx = x + d[0], ny = y + d[1];
                if (nx < 0 || ny < 0 || nx >= w) continue;
                const int l = labels(ny, nx);
                if (l < 0) continue;
                if (label < 0) label = l;
                else sets.unite(label, l);
            }
            labels(y, x) = label < 0 ? sets.make() : label;
        }
    }

    // Second pass: accumulate per root.
    std::vector<Accum> acc;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (labels(y, x) < 0) continue;
            const auto root = static_cast<std::size_t>(sets.find(labels(y, x)));
            if (acc.size() <= root) acc.resize(root + 1);
            Accum& a = acc[root];
            if (!a.seen) {
                a.box = {x, y, x + 1, y + 1};
                a.seen = true;
            } else {
                a.box = a.box.united({x, y, x + 1, y + 1});
            }
            if (counted(y, x)) ++a.count;
        }
    }

    std::vector<DiffRegion> regions;
    for (const auto& a : acc)
        if (a.seen) regions.push_back({0, a.box, a.count});

    // Merge boxes that overlap until the set is pairwise disjoint.
    for (bool merged = true; merged;) {
        merged = false;
        for (std::size_t i = 0; i < regions.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < regions.size(); ++j) {
                if (!regions[i].bbox.overlaps(regions[j].bbox)) continue;
                regions[i].bbox = regions[i].bbox.united(regions[j].bbox);
                regions[i].pixel_count += regions[j].pixel_count;
                regions.erase(regions.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
                break;
            }
        }
    }

    std::sort(regions.begin(), regions.end(), [](const DiffRegion& a, const DiffRegion& b) {
        return std::tie(a.bbox.y1, a.bbox.x1) < std::tie(b.bbox.y1, b.bbox.x1);
    });
    for (std::size_t i = 0; i < regions.size(); ++i) regions[i].index = static_cast<int>(i);
    return regions;
}

ParsedInfo parse_differences(const Image& pre, const Image& post, const DiffOptions& options, int step_index) {
    const MaskResult raw = diff_mask(pre, post, options.threshold);
    const Mask grown = dilate(raw.mask, options.dilation_radius);
    ParsedInfo info;
    info.step_index = step_index;
    info.image_dims = {static_cast<int>(raw.mask.cols()), static_cast<int>(raw.mask.rows())};
    info.dimension_mismatch = raw.dimension_mismatch;
    info.regions = extract_regions(grown, raw.mask);
    return info;
}

std::pair<int, int> label_origin(const DiffRegion& region, int image_width, int image_height) {
    const std::string text = std::to_string(region.index);
    const int lw = raster::text_width(text);
    const int lh = raster::text_height();
    int x = region.bbox.x1;
    int y = region.bbox.y1 - lh - 1;
    if (y < 0) {
        x = region.bbox.x1 + 2;
        y = region.bbox.y1 + 2;
    }
    x = std::clamp(x, 0, std::max(0, image_width - lw));
    y = std::clamp(y, 0, std::max(0, image_height - lh));
    return {x, y};
}

Image annotate(const Image& image, const std::vector<DiffRegion>& regions) {
    Image out = image;
    for (const auto& r : regions) {
        const BBox b{std::max(0, r.bbox.x1), std::max(0, r.bbox.y1), std::min(image.width(), r.bbox.x2),
                     std::min(image.height(), r.bbox.y2)};
        raster::outline_rect(out, b.x1, b.y1, b.x2, b.y2, kAnnotationColor);
    }
    for (const auto& r : regions) {
        const auto [lx, ly] = label_origin(r, image.width(), image.height());
        raster::draw_text(out, lx, ly, std::to_string(r.index), kAnnotationColor);
    }
    return out;
}

void to_json(nlohmann::json& j, const BBox& b) { j = nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

void from_json(const nlohmann::json& j, BBox& b) {
    b = {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

void to_json(nlohmann::json& j, const DiffRegion& r) {
    j = {{"index", r.index}, {"bbox", r.bbox}, {"pixel_count", r.pixel_count}};
}

void from_json(const nlohmann::json& j, DiffRegion& r) {
    r.index = j.at("index").get<int>();
    r.bbox = j.at("bbox").get<BBox>();
    r.pixel_count = j.at("pixel_count").get<long>();
}

void to_json(nlohmann::json& j, const ParsedInfo& p) {
    j = {{"step_index", p.step_index},
         {"image_dims", {{"width", p.image_dims.width}, {"height", p.image_dims.height}}},
         {"dimension_mismatch", p.dimension_mismatch},
         {"regions", p.regions}};
}

void from_json(const nlohmann::json& j, ParsedInfo& p) {
    p.step_index = j.at("step_index").get<int>();
    p.image_dims = {j.at("image_dims").at("width").get<int>(), j.at("image_dims").at("height").get<int>()};
    p.dimension_mismatch = j.value("dimension_mismatch", false);
    p.regions = j.at("regions").get<std::vector<DiffRegion>>();
}

}  // namespace ripple::diff
