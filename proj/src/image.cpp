#include "ripple/image.hpp"

#include "ripple/error.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ripple {

Image::Image(int width, int height, Rgb fill) {
    channels_[0] = Plane::Constant(height, width, fill.r);
    channels_[1] = Plane::Constant(height, width, fill.g);
    channels_[2] = Plane::Constant(height, width, fill.b);
}

namespace {

void on_png_error(png_structp png, png_const_charp msg) {
    auto* what = static_cast<std::string*>(png_get_error_ptr(png));
    if (what) *what = msg ? msg : "png error";
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct ReadState {
    std::span<const std::uint8_t> data;
    std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
    if (st->offset + n > st->data.size()) png_error(png, "truncated PNG");
    std::memcpy(out, st->data.data() + st->offset, n);
    st->offset += n;
}

void write_to_vector(png_structp png, png_bytep in, png_size_t n) {
    auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    v->insert(v->end(), in, in + n);
}

void flush_noop(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    std::string error;
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width()) * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode: " + error);
    }
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const Rgb p = image.at(x, y);
            row[static_cast<std::size_t>(x) * 3 + 0] = p.r;
            row[static_cast<std::size_t>(x) * 3 + 1] = p.g;
            row[static_cast<std::size_t>(x) * 3 + 2] = p.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG stream");
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    ReadState state{bytes, 0};
    Image image;
    std::vector<std::uint8_t> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode: " + error);
    }
    png_set_read_fn(png, &state, read_from_memory);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    image = Image(w, h);
    row.resize(png_get_rowbytes(png, info));
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            const auto i = static_cast<std::size_t>(x) * 3;
            image.set(x, y, {row[i], row[i + 1], row[i + 2]});
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

Image downscale(const Image& image, int factor) {
    if (factor <= 1) return image;
    const int w = (image.width() + factor - 1) / factor;
    const int h = (image.height() + factor - 1) / factor;
    Image out(w, h);
    for (int c = 0; c < 3; ++c) {
        const Plane& src = image.channel(c);
        Plane& dst = out.channel(c);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int bh = std::min(factor, image.height() - y * factor);
                const int bw = std::min(factor, image.width() - x * factor);
                const auto block = src.block(y * factor, x * factor, bh, bw).cast<int>();
                dst(y, x) = static_cast<std::uint8_t>((block.sum() + bh * bw / 2) / (bh * bw));
            }
        }
    }
    return out;
}

}  // namespace ripple
