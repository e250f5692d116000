#pragma once

#include <array>
#include <string>

#include <torch/torch.h>

namespace warpres {

/// Generator tap levels. The actual pixel size of each level comes from
/// ModelConfig::tap_resolution (16/32/64 at desk scale).
enum class Resolution : int { R16 = 0, R32 = 1, R64 = 2 };

inline constexpr std::array<Resolution, 3> kAllResolutions{Resolution::R16, Resolution::R32, Resolution::R64};

inline std::string to_string(Resolution r) {
    switch (r) {
    case Resolution::R16: return "R16";
    case Resolution::R32: return "R32";
    case Resolution::R64: return "R64";
    }
    return "?";
}

/// C x H x W activation grid, batched as [N, C, H, W].
struct FeatureMap {
    torch::Tensor data;
    Resolution tag = Resolution::R64;
};

/// Per-pixel (dx, dy) displacement in pixels of the field's own resolution,
/// batched as [N, 2, H, W]. A flow on the edited frame points at the
/// corresponding location in the unedited frame.
struct FlowField {
    torch::Tensor data;

    int64_t height() const { return data.size(-2); }
    int64_t width() const { return data.size(-1); }
};

/// Generator output image plus its three mid-level feature taps.
struct GeneratorTaps {
    torch::Tensor image;              // [N, 3, S, S] in [-1, 1]
    std::array<torch::Tensor, 3> taps; // indexed by Resolution

    const torch::Tensor& tap(Resolution r) const { return taps[static_cast<int>(r)]; }
    FeatureMap feature(Resolution r) const { return {tap(r), r}; }
};

} // namespace warpres
