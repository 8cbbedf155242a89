#pragma once

#include "ripple/image.hpp"

#include <string_view>

namespace ripple::raster {

// Fixed 5x8 bitmap font: each glyph occupies a 6x8 cell (one blank column).
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 8;
inline constexpr int kAdvance = 6;

/// Whether font pixel (col, row) of `c` is set. Unknown characters render as '?'.
bool glyph_pixel(char c, int col, int row);

int text_width(std::string_view text, int scale = 1);
inline int text_height(int scale = 1) { return kGlyphHeight * scale; }

/// Draws text with its top-left at (x, y); pixels outside the image are clipped.
void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale = 1);

void fill_rect(Image& image, int x, int y, int w, int h, Rgb color);
/// One-pixel outline of the half-open box [x1, x2) x [y1, y2).
void outline_rect(Image& image, int x1, int y1, int x2, int y2, Rgb color);

}  // namespace ripple::raster
