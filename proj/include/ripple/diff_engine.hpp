#pragma once

#include "ripple/image.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace ripple::diff {

/// Half-open pixel box [x1, x2) x [y1, y2).
struct BBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    int width() const { return x2 - x1; }
    int height() const { return y2 - y1; }
    bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }
    bool overlaps(const BBox& o) const { return x1 < o.x2 && o.x1 < x2 && y1 < o.y2 && o.y1 < y2; }
    BBox united(const BBox& o) const {
        return {std::min(x1, o.x1), std::min(y1, o.y1), std::max(x2, o.x2), std::max(y2, o.y2)};
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct DiffRegion {
    int index = 0;
    BBox bbox;
    long pixel_count = 0;
    friend bool operator==(const DiffRegion&, const DiffRegion&) = default;
};

struct ImageDims {
    int width = 0, height = 0;
    friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

struct ParsedInfo {
    int step_index = 0;
    std::vector<DiffRegion> regions;
    ImageDims image_dims;
    bool dimension_mismatch = false;
    friend bool operator==(const ParsedInfo&, const ParsedInfo&) = default;
};

struct DiffOptions {
    int threshold = 30;
    int dilation_radius = 3;
};

struct MaskResult {
    Mask mask;
    bool dimension_mismatch = false;
};

inline constexpr Rgb kAnnotationColor{255, 0, 255};

/// Per-pixel channel-max absolute difference test: bit set iff max_c |a_c - b_c| > threshold.
template <typename DerivedA, typename DerivedB>
Mask exceeds_threshold(const Eigen::ArrayBase<DerivedA>& a, const Eigen::ArrayBase<DerivedB>& b, int threshold) {
    return (a.template cast<int>() - b.template cast<int>()).abs() > threshold;
}

/// Differing-pixel mask. Images of different size are compared over their common
/// area; the band covered by only one of them is marked fully different and the
/// result is flagged.
MaskResult diff_mask(const Image& a, const Image& b, int threshold);

/// Square structuring element of side 2*radius+1 (Chebyshev ball).
Mask dilate(const Mask& mask, int radius);

/// 8-connected components of `mask`, boxed tightly; boxes that overlap are merged
/// so that regions never overlap. pixel_count counts bits of `mask` itself.
std::vector<DiffRegion> extract_regions(const Mask& mask);

/// Components and boxes come from `grouping`; pixel_count counts set bits of
/// `counted` inside each component. `counted` must be a subset of `grouping`.
std::vector<DiffRegion> extract_regions(const Mask& grouping, const Mask& counted);

/// Mask, dilation, and region extraction for one screenshot pair.
ParsedInfo parse_differences(const Image& pre, const Image& post, const DiffOptions& options, int step_index = 0);

/// Top-left of a region's index label, kept inside the image.
std::pair<int, int> label_origin(const DiffRegion& region, int image_width, int image_height);

/// Copy of `image` with each region outlined and its index drawn next to it.
Image annotate(const Image& image, const std::vector<DiffRegion>& regions);

void to_json(nlohmann::json& j, const BBox& b);
void from_json(const nlohmann::json& j, BBox& b);
void to_json(nlohmann::json& j, const DiffRegion& r);
void from_json(const nlohmann::json& j, DiffRegion& r);
void to_json(nlohmann::json& j, const ParsedInfo& p);
void from_json(const nlohmann::json& j, ParsedInfo& p);

}  // namespace ripple::diff
