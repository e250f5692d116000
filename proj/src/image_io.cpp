#include "warpres/image_io.hpp"

#include <cstdio>
#include <memory>
#include <vector>

#include <png.h>

#include "warpres/errors.hpp"

namespace warpres {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

} // namespace

torch::Tensor to_uint8(const torch::Tensor& image) {
    auto x = image.dim() == 4 ? image.squeeze(0) : image;
    if (x.dim() != 3 || x.size(0) != 3) throw ShapeError("expected a [3, H, W] image, got " + c10::str(image.sizes()));
    auto v = ((x.detach().to(torch::kFloat64).clamp(-1.0, 1.0) + 1.0) * 127.5).round();
    return v.to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

void save_png_u8(const torch::Tensor& rgb, const std::string& path) {
    if (rgb.dim() != 3 || rgb.size(2) != 3 || rgb.scalar_type() != torch::kUInt8)
        throw ShapeError("save_png_u8 expects uint8 [H, W, 3]");
    auto data = rgb.contiguous();
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path);
    }
    const auto h = static_cast<png_uint_32>(data.size(0)), w = static_cast<png_uint_32>(data.size(1));
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    auto* base = data.data_ptr<uint8_t>();
    for (png_uint_32 y = 0; y < h; ++y) png_write_row(png, base + static_cast<std::size_t>(y) * w * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_png(const torch::Tensor& image, const std::string& path) { save_png_u8(to_uint8(image), path); }

torch::Tensor load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw FormatError("not a PNG file: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    // Normalise everything to 8-bit RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG layout in " + path);
    }
    auto out = torch::empty({static_cast<int64_t>(h), static_cast<int64_t>(w), 3}, torch::kUInt8);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.data_ptr<uint8_t>() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out.permute({2, 0, 1}).to(torch::kFloat32) / 127.5 - 1.0;
}

void save_grid(const torch::Tensor& images, const std::string& path, int64_t columns) {
    if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("save_grid expects [N, 3, H, W]");
    const int64_t n = images.size(0), h = images.size(2), w = images.size(3);
    const int64_t cols = std::max<int64_t>(1, std::min(columns, n));
    const int64_t rows = (n + cols - 1) / cols;
    auto canvas = torch::ones({3, rows * h, cols * w});
    for (int64_t i = 0; i < n; ++i)
        canvas.narrow(1, (i / cols) * h, h).narrow(2, (i % cols) * w, w).copy_(images[i].detach().to(torch::kFloat32));
    save_png(canvas, path);
}

} // namespace warpres
