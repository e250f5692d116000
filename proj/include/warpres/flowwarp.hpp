#pragma once

#include <cstdint>
#include <string>

#include <torch/torch.h>

#include "warpres/config.hpp"
#include "warpres/types.hpp"

namespace warpres {

/// Backward bilinear warp: out(p) = f(p + flow(p)) with clamp-to-edge
/// sampling. Differentiable w.r.t. both `f` and `flow`.
///
/// f: [N, C, H, W], flow: [N, 2, H, W] (channel 0 = dx, 1 = dy).
torch::Tensor warp(const torch::Tensor& f, const torch::Tensor& flow);
FeatureMap warp(const FeatureMap& f, const FlowField& flow);

/// Bilinear resample of the field to `target` x `target`, with displacement
/// values scaled by target / source.
FlowField rescale_flow(const FlowField& flow, int64_t target_resolution);

/// Box-filter downsampling of an image or feature batch by an integer factor.
torch::Tensor area_downsample(const torch::Tensor& x, int64_t factor);

/// Exhaustive block matching. For every stride-grid point of img_a, the
/// integer displacement within the search radius minimizing the sum of
/// absolute differences against img_b (ties go to the smaller displacement),
/// interpolated bilinearly to a dense field. Not differentiable.
///
/// img_a, img_b: [N, C, H, W] or [C, H, W]. Returns [N, 2, H, W].
FlowField pseudo_gt_flow(const torch::Tensor& img_a, const torch::Tensor& img_b, const FlowOracleConfig& cfg);

/// Mean end-point error between two fields of identical shape.
double endpoint_error(const FlowField& a, const FlowField& b);

/// Middlebury .flo: float 202021.25, int32 width, int32 height, then
/// interleaved (dx, dy) float32 row-major. Accepts [2, H, W] or [1, 2, H, W].
void write_flo(const FlowField& flow, const std::string& path);
FlowField read_flo(const std::string& path);

/// Colour-wheel visualisation: hue = flow direction (atan2(dy, dx), 0 deg =
/// +x, counter-clockwise in image coordinates), saturation = magnitude /
/// max_magnitude clipped to 1, value = 1. Zero flow is white. A non-positive
/// `max_magnitude` uses the field's own maximum. Returns uint8 [H, W, 3].
torch::Tensor flow_to_color(const FlowField& flow, double max_magnitude = 0.0);

/// Local correlation volume: for each displacement d with |d|_inf <= radius,
/// mean over channels of a(p) * b(p + d) (zero outside b). [N, (2r+1)^2, H, W]
torch::Tensor correlation(const torch::Tensor& a, const torch::Tensor& b, int64_t radius);

/// Coarse-to-fine correlation flow estimator over generator taps.
///
/// At each level a soft arg-min over a box-filtered SSD cost on the raw taps
/// gives a matching prior. A small decoder reads the correlation of adapted
/// features plus that prior and adds a residual. Finer levels start from the
/// upsampled coarser flow and match against the warped unedited taps.
class FlowNetImpl : public torch::nn::Module {
public:
    explicit FlowNetImpl(const ModelConfig& cfg);

    /// taps_g: unedited generator taps, taps_e: edited. Flow lives on the
    /// finest tap grid, edited -> unedited.
    FlowField forward(const std::array<torch::Tensor, 3>& taps_g, const std::array<torch::Tensor, 3>& taps_e);

private:
    ModelConfig cfg_;
    torch::nn::ModuleList adapters_{nullptr};
    torch::nn::ModuleList decoders_{nullptr};
};
TORCH_MODULE(FlowNet);

} // namespace warpres
