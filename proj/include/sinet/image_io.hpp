#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/metrics.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// 8-bit image, interleaved row-major, 1 (gray) or 3 (RGB) channels
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int r, int c, int ch = 0) const {
        return pixels[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
};

namespace detail {

struct FileHandle {
    FILE* f = nullptr;
    explicit FileHandle(FILE* fp) : f(fp) {}
    ~FileHandle() {
        if (f) std::fclose(f);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

} // namespace detail

inline ImageU8 read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    require(fp != nullptr, ErrorKind::Io, "cannot open " + path);
    detail::FileHandle guard(fp);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorKind::Io, "png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, "corrupt or truncated PNG: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageU8 out;
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.channels = static_cast<int>(png_get_channels(png, info));
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, "unsupported PNG channel layout in " + path);
    }

    out.pixels.resize(static_cast<std::size_t>(out.height) * out.width * out.channels);
    std::vector<png_bytep> rows(out.height);
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    for (int r = 0; r < out.height; ++r) rows[r] = out.pixels.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

// header-only probe: dimensions without decoding pixel data
inline std::pair<int, int> read_png_dims(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    require(fp != nullptr, ErrorKind::Io, "cannot open " + path);
    detail::FileHandle guard(fp);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(ErrorKind::Io, "png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Io, "corrupt or truncated PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    png_destroy_read_struct(&png, &info, nullptr);
    return {h, w};
}

inline void write_png(const std::string& path, int h, int w, int channels,
                      const std::vector<std::uint8_t>& pixels) {
    require(channels == 1 || channels == 3, ErrorKind::Validation,
            "write_png: channels must be 1 or 3");
    require(pixels.size() == static_cast<std::size_t>(h) * w * channels, ErrorKind::Validation,
            "write_png: pixel count does not match dims");
    FILE* fp = std::fopen(path.c_str(), "wb");
    require(fp != nullptr, ErrorKind::Io, "cannot create " + path);
    detail::FileHandle guard(fp);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(ErrorKind::Io, "png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Io, "PNG write failed: " + path);
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (int r = 0; r < h; ++r)
        rows[r] = const_cast<png_bytep>(pixels.data() + r * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// predictions are 8-bit grayscale normalized by 255; channel 0 is used when
// a prediction or mask arrives with three channels
inline GrayMap gray_from_image(const ImageU8& img) {
    std::vector<Real> v(static_cast<std::size_t>(img.height) * img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            v[static_cast<std::size_t>(r) * img.width + c] = Real(img.at(r, c, 0)) / Real(255);
    return GrayMap::from_values(img.height, img.width, std::move(v));
}

// GT masks binarize at > 127
inline BinaryMask mask_from_image(const ImageU8& img) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(img.height) * img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            v[static_cast<std::size_t>(r) * img.width + c] = img.at(r, c, 0) > 127 ? 1 : 0;
    return BinaryMask::from_values(img.height, img.width, std::move(v));
}

inline std::vector<std::uint8_t> bytes_from_gray(const GrayMap& p) {
    std::vector<std::uint8_t> v(p.numel());
    for (std::size_t i = 0; i < p.numel(); ++i)
        v[i] = static_cast<std::uint8_t>(std::lround(p.values[i] * 255));
    return v;
}

// (1,3,H,W) tensor in [0,1]; grayscale inputs are replicated across channels
inline Tensor tensor_from_image(const ImageU8& img) {
    std::vector<Real> v(static_cast<std::size_t>(3) * img.height * img.width);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * img.width + c;
            for (int ch = 0; ch < 3; ++ch)
                v[ch * plane + i] =
                    Real(img.at(r, c, img.channels == 3 ? ch : 0)) / Real(255);
        }
    return Tensor::from_data({1, 3, img.height, img.width}, std::move(v));
}

inline ImageU8 image_from_tensor(const Tensor& t, int n = 0) {
    require(t.c() == 1 || t.c() == 3, ErrorKind::Validation,
            "image_from_tensor: need 1 or 3 channels, got " + std::to_string(t.c()));
    ImageU8 img;
    img.height = t.h();
    img.width = t.w();
    img.channels = t.c();
    img.pixels.resize(static_cast<std::size_t>(t.h()) * t.w() * t.c());
    for (int r = 0; r < t.h(); ++r)
        for (int c = 0; c < t.w(); ++c)
            for (int ch = 0; ch < t.c(); ++ch) {
                const Real v = std::clamp(t.at(n, ch, r, c), Real(0), Real(1));
                img.pixels[(static_cast<std::size_t>(r) * t.w() + c) * t.c() + ch] =
                    static_cast<std::uint8_t>(std::lround(v * 255));
            }
    return img;
}

} // namespace sinet
