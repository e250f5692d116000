#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "warpres/binary_io.hpp"
#include "warpres/errors.hpp"
#include "warpres/flowwarp.hpp"

namespace warpres {

namespace {

constexpr float kFloMagic = 202021.25F;

struct Displacement {
    int64_t dx, dy;
};

// Search order: increasing |d|^2, then dy, then dx. The first strict minimum
// in this order is the tie-break winner, so equal costs resolve toward zero.
std::vector<Displacement> search_order(int64_t radius) {
    std::vector<Displacement> out;
    for (int64_t dy = -radius; dy <= radius; ++dy)
        for (int64_t dx = -radius; dx <= radius; ++dx) out.push_back({dx, dy});
    std::stable_sort(out.begin(), out.end(), [](const Displacement& a, const Displacement& b) {
        const int64_t ma = a.dx * a.dx + a.dy * a.dy, mb = b.dx * b.dx + b.dy * b.dy;
        if (ma != mb) return ma < mb;
        if (a.dy != b.dy) return a.dy < b.dy;
        return a.dx < b.dx;
    });
    return out;
}

std::vector<int64_t> grid_positions(int64_t size, int64_t stride) {
    std::vector<int64_t> pos;
    for (int64_t p = 0; p <= size - 1; p += stride) pos.push_back(p);
    if (pos.back() != size - 1) pos.push_back(size - 1);
    return pos;
}

// Pixel access with clamp-to-edge.
inline float at(const float* img, int64_t x, int64_t y, int64_t h, int64_t w) {
    x = std::clamp<int64_t>(x, 0, w - 1);
    y = std::clamp<int64_t>(y, 0, h - 1);
    return img[y * w + x];
}

void match_single(const float* a, const float* b, int64_t c, int64_t h, int64_t w, const FlowOracleConfig& cfg,
                  const std::vector<Displacement>& order, float* out_dx, float* out_dy) {
    const auto gx = grid_positions(w, cfg.stride);
    const auto gy = grid_positions(h, cfg.stride);
    const int64_t half = cfg.block_size / 2;
    const int64_t plane = h * w;
    std::vector<float> grid_dx(gx.size() * gy.size()), grid_dy(gx.size() * gy.size());

    // Reference blocks are gathered once per grid point so the inner loop runs
    // over contiguous memory.
    std::vector<float> block(static_cast<std::size_t>(c * cfg.block_size * cfg.block_size));
    for (std::size_t j = 0; j < gy.size(); ++j) {
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const int64_t px = gx[i], py = gy[j];
            std::size_t k = 0;
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t oy = -half; oy <= half; ++oy)
                    for (int64_t ox = -half; ox <= half; ++ox) block[k++] = at(a + ch * plane, px + ox, py + oy, h, w);

            double best = std::numeric_limits<double>::infinity();
            Displacement best_d{0, 0};
            for (const auto& d : order) {
                double sad = 0.0;
                k = 0;
                bool pruned = false;
                for (int64_t ch = 0; ch < c && !pruned; ++ch) {
                    const float* bc = b + ch * plane;
                    for (int64_t oy = -half; oy <= half; ++oy) {
                        for (int64_t ox = -half; ox <= half; ++ox)
                            sad += std::fabs(static_cast<double>(block[k++]) -
                                             at(bc, px + d.dx + ox, py + d.dy + oy, h, w));
                        // Partial sums only grow; an exceeded bound cannot win.
                        if (sad > best) {
                            pruned = true;
                            break;
                        }
                    }
                }
                if (!pruned && sad < best) {
                    best = sad;
                    best_d = d;
                }
            }
            grid_dx[j * gx.size() + i] = static_cast<float>(best_d.dx);
            grid_dy[j * gx.size() + i] = static_cast<float>(best_d.dy);
        }
    }

    // Dense field by bilinear interpolation between grid estimates.
    auto locate = [](const std::vector<int64_t>& g, int64_t p, std::size_t& k, double& t) {
        k = 0;
        while (k + 1 < g.size() && g[k + 1] <= p) ++k;
        t = k + 1 < g.size() ? static_cast<double>(p - g[k]) / static_cast<double>(g[k + 1] - g[k]) : 0.0;
    };
    const std::size_t nx = gx.size();
    for (int64_t y = 0; y < h; ++y) {
        std::size_t ky;
        double ty;
        locate(gy, y, ky, ty);
        const std::size_t ky1 = std::min(ky + 1, gy.size() - 1);
        for (int64_t x = 0; x < w; ++x) {
            std::size_t kx;
            double tx;
            locate(gx, x, kx, tx);
            const std::size_t kx1 = std::min(kx + 1, nx - 1);
            auto lerp2 = [&](const std::vector<float>& g) {
                const double top = (1.0 - tx) * g[ky * nx + kx] + tx * g[ky * nx + kx1];
                const double bottom = (1.0 - tx) * g[ky1 * nx + kx] + tx * g[ky1 * nx + kx1];
                return static_cast<float>((1.0 - ty) * top + ty * bottom);
            };
            out_dx[y * w + x] = lerp2(grid_dx);
            out_dy[y * w + x] = lerp2(grid_dy);
        }
    }
}

} // namespace

FlowField pseudo_gt_flow(const torch::Tensor& img_a, const torch::Tensor& img_b, const FlowOracleConfig& cfg) {
    cfg.validate();
    torch::NoGradGuard no_grad;
    auto a = (img_a.dim() == 3 ? img_a.unsqueeze(0) : img_a).detach().to(torch::kFloat32).contiguous();
    auto b = (img_b.dim() == 3 ? img_b.unsqueeze(0) : img_b).detach().to(torch::kFloat32).contiguous();
    if (a.sizes() != b.sizes()) throw ShapeError("pseudo_gt_flow: images differ in shape");
    const int64_t n = a.size(0), c = a.size(1), h = a.size(2), w = a.size(3);
    if (h < cfg.block_size || w < cfg.block_size)
        throw ShapeError("pseudo_gt_flow: image smaller than the block size");
    const auto order = search_order(cfg.search_radius);
    auto flow = torch::empty({n, 2, h, w}, torch::kFloat32);
    for (int64_t i = 0; i < n; ++i) {
        float* dst = flow.data_ptr<float>() + i * 2 * h * w;
        match_single(a.data_ptr<float>() + i * c * h * w, b.data_ptr<float>() + i * c * h * w, c, h, w, cfg, order,
                     dst, dst + h * w);
    }
    return {flow};
}

double endpoint_error(const FlowField& a, const FlowField& b) {
    if (a.data.sizes() != b.data.sizes()) throw ShapeError("endpoint_error: flow fields differ in shape");
    auto diff = (a.data - b.data).to(torch::kFloat64);
    const int64_t ch = diff.dim() - 3;
    return diff.pow(2).sum(ch).sqrt().mean().item<double>();
}

void write_flo(const FlowField& flow, const std::string& path) {
    auto d = flow.data;
    if (d.dim() == 4) {
        if (d.size(0) != 1) throw ShapeError("write_flo writes a single field");
        d = d.squeeze(0);
    }
    if (d.dim() != 3 || d.size(0) != 2) throw ShapeError("write_flo expects a [2, H, W] field");
    auto interleaved = d.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write flow file " + path);
    bin::write<float>(out, kFloMagic);
    bin::write<int32_t>(out, static_cast<int32_t>(d.size(2)));
    bin::write<int32_t>(out, static_cast<int32_t>(d.size(1)));
    out.write(reinterpret_cast<const char*>(interleaved.data_ptr<float>()),
              static_cast<std::streamsize>(interleaved.numel() * 4));
    if (!out) throw IoError("failed writing flow file " + path);
}

FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open flow file " + path);
    const auto magic = bin::read<float>(in, ".flo magic");
    if (magic != kFloMagic) throw FormatError("bad .flo magic in " + path);
    const auto w = bin::read<int32_t>(in, ".flo width");
    const auto h = bin::read<int32_t>(in, ".flo height");
    if (w <= 0 || h <= 0) throw FormatError("invalid .flo dimensions in " + path);
    auto interleaved = torch::empty({h, w, 2}, torch::kFloat32);
    bin::read_bytes(in, interleaved.data_ptr<float>(), static_cast<std::size_t>(h) * w * 2 * 4, ".flo payload");
    return {interleaved.permute({2, 0, 1}).contiguous()};
}

torch::Tensor flow_to_color(const FlowField& flow, double max_magnitude) {
    auto d = flow.data.dim() == 4 ? flow.data[0] : flow.data;
    d = d.detach().to(torch::kFloat64).contiguous();
    const int64_t h = d.size(1), w = d.size(2);
    auto dx = d[0], dy = d[1];
    auto mag = (dx * dx + dy * dy).sqrt();
    double max_mag = max_magnitude > 0.0 ? max_magnitude : mag.max().item<double>();
    if (max_mag <= 0.0) max_mag = 1.0;
    auto out = torch::empty({h, w, 3}, torch::kUInt8);
    auto* o = out.data_ptr<uint8_t>();
    const auto* px = dx.contiguous().data_ptr<double>();
    const auto* py = dy.contiguous().data_ptr<double>();
    for (int64_t i = 0; i < h * w; ++i) {
        double hue = std::atan2(py[i], px[i]) * 180.0 / M_PI;
        if (hue < 0) hue += 360.0;
        const double sat = std::min(1.0, std::sqrt(px[i] * px[i] + py[i] * py[i]) / max_mag);
        // HSV -> RGB with V = 1.
        const double c = sat;
        const double hp = hue / 60.0;
        const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
        double r = 0, g = 0, b = 0;
        if (hp < 1) { r = c; g = x; }
        else if (hp < 2) { r = x; g = c; }
        else if (hp < 3) { g = c; b = x; }
        else if (hp < 4) { g = x; b = c; }
        else if (hp < 5) { r = x; b = c; }
        else { r = c; b = x; }
        const double m = 1.0 - c;
        o[3 * i + 0] = static_cast<uint8_t>(std::lround(255.0 * (r + m)));
        o[3 * i + 1] = static_cast<uint8_t>(std::lround(255.0 * (g + m)));
        o[3 * i + 2] = static_cast<uint8_t>(std::lround(255.0 * (b + m)));
    }
    return out;
}

} // namespace warpres
