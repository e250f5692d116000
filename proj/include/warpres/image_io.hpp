#pragma once

#include <string>

#include <torch/torch.h>

namespace warpres {

/// RGB PNG <-> [3, H, W] float in [-1, 1] (0 <-> -1, 255 <-> 1).
torch::Tensor load_png(const std::string& path);
void save_png(const torch::Tensor& image, const std::string& path);

/// uint8 [H, W, 3] written verbatim.
void save_png_u8(const torch::Tensor& rgb, const std::string& path);

/// [N, 3, H, W] tiled into rows of `columns` images.
void save_grid(const torch::Tensor& images, const std::string& path, int64_t columns);

/// [-1, 1] float image -> uint8 [H, W, 3] with the same rounding as save_png.
torch::Tensor to_uint8(const torch::Tensor& image);

} // namespace warpres
