#include "warpres/latent.hpp"

#include <fstream>

#include "warpres/binary_io.hpp"
#include "warpres/errors.hpp"

namespace warpres {

namespace {

constexpr char kDirectionMagic[4] = {'W', 'D', 'I', 'R'};
constexpr uint32_t kDirectionVersion = 1;

torch::Tensor alpha_view(const torch::Tensor& alpha, const LatentCode& w) {
    if (alpha.dim() == 0) return alpha.to(w.codes.dtype());
    if (alpha.dim() != 1 || alpha.size(0) != w.batch() || !w.batched())
        throw ShapeError("per-sample alpha needs one value per batch entry");
    return alpha.to(w.codes.dtype()).view({-1, 1, 1});
}

} // namespace

torch::Tensor EditDirection::effective(int64_t layers) const {
    if (broadcast) return direction.reshape({1, -1}).expand({layers, direction.size(-1)});
    return direction;
}

void check_latent(const LatentCode& w, int64_t layers, int64_t dim) {
    if (!w.codes.defined() || (w.codes.dim() != 2 && w.codes.dim() != 3))
        throw ShapeError("latent code must be [L, D] or [N, L, D]");
    if (w.layers() != layers || w.dim() != dim)
        throw ShapeError("latent code shape (" + std::to_string(w.layers()) + ", " + std::to_string(w.dim()) +
                         ") does not match model (" + std::to_string(layers) + ", " + std::to_string(dim) + ")");
}

void check_same_shape(const LatentCode& a, const LatentCode& b) {
    if (!a.codes.defined() || !b.codes.defined() || a.codes.sizes() != b.codes.sizes())
        throw ShapeError("latent codes have mismatched shapes");
}

LatentSeed sample_z(uint64_t rng_seed, int64_t z_dim) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    auto z = torch::empty({z_dim}, torch::kFloat32);
    auto* p = z.data_ptr<float>();
    for (int64_t i = 0; i < z_dim; ++i) p[i] = normal(rng);
    return {z, rng_seed};
}

LatentCode simulate_edit(const LatentCode& w, const LatentCode& w_r, double alpha) {
    check_same_shape(w, w_r);
    if (!std::isfinite(alpha)) throw ShapeError("alpha must be finite");
    if (alpha == 0.0) return {w.codes};
    // lerp is exact at both endpoints
    return {torch::lerp(w.codes, w_r.codes, alpha)};
}

LatentCode simulate_edit(const LatentCode& w, const LatentCode& w_r, const torch::Tensor& alpha) {
    check_same_shape(w, w_r);
    return {torch::lerp(w.codes, w_r.codes, alpha_view(alpha, w))};
}

double sample_edit_alpha(std::mt19937_64& rng, double edit_probability) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= edit_probability) return 0.0;
    std::uniform_real_distribution<double> range(0.4, 0.5);
    double a = range(rng);
    // uniform_real_distribution is half-open; keep the open interval (0.4, 0.5).
    while (a <= 0.4) a = range(rng);
    return a;
}

LatentCode reverse_edit(const LatentCode& w_enc, const LatentCode& direction, double alpha) {
    check_same_shape(w_enc, direction);
    if (alpha == 0.0) return {w_enc.codes};
    return {w_enc.codes - alpha * direction.codes};
}

LatentCode reverse_edit(const LatentCode& w_enc, const LatentCode& direction, const torch::Tensor& alpha) {
    check_same_shape(w_enc, direction);
    return {w_enc.codes - alpha_view(alpha, w_enc) * direction.codes};
}

LatentCode apply_direction(const LatentCode& w, const EditDirection& dir, double strength) {
    if (dir.direction.size(-1) != w.dim() || (!dir.broadcast && dir.direction.size(0) != w.layers()))
        throw ShapeError("edit direction shape does not match latent code");
    if (strength == 0.0) return {w.codes};
    auto d = dir.effective(w.layers()).to(w.codes.dtype());
    return {w.codes + strength * d};
}

void save_direction(const EditDirection& dir, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write direction file " + path);
    auto d = dir.direction.to(torch::kFloat32).contiguous();
    const uint32_t dim = static_cast<uint32_t>(d.size(-1));
    const uint32_t layers = dir.broadcast ? 0U : static_cast<uint32_t>(d.size(0));
    out.write(kDirectionMagic, 4);
    bin::write<uint32_t>(out, kDirectionVersion);
    bin::write<uint32_t>(out, layers);
    bin::write<uint32_t>(out, dim);
    bin::write<float>(out, dir.default_strength);
    out.write(reinterpret_cast<const char*>(d.data_ptr<float>()), static_cast<std::streamsize>(d.numel() * 4));
    bin::write<uint32_t>(out, static_cast<uint32_t>(dir.name.size()));
    out.write(dir.name.data(), static_cast<std::streamsize>(dir.name.size()));
    if (!out) throw IoError("failed writing direction file " + path);
}

EditDirection load_direction(const std::string& path, int64_t expected_layers, int64_t expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open direction file " + path);
    char magic[4];
    bin::read_bytes(in, magic, 4, "direction magic");
    if (std::memcmp(magic, kDirectionMagic, 4) != 0) throw FormatError("bad direction magic in " + path);
    const auto version = bin::read<uint32_t>(in, "direction version");
    if (version != kDirectionVersion)
        throw FormatError("unsupported direction version " + std::to_string(version));
    const auto layers = bin::read<uint32_t>(in, "direction layers");
    const auto dim = bin::read<uint32_t>(in, "direction dim");
    if (dim == 0) throw FormatError("direction dimension is zero");
    EditDirection dir;
    dir.default_strength = bin::read<float>(in, "default strength");
    dir.broadcast = layers == 0;
    const int64_t rows = dir.broadcast ? 1 : layers;
    dir.direction = torch::empty({rows, static_cast<int64_t>(dim)}, torch::kFloat32);
    bin::read_bytes(in, dir.direction.data_ptr<float>(), static_cast<std::size_t>(rows) * dim * 4, "direction payload");
    const auto name_len = bin::read<uint32_t>(in, "name length");
    dir.name.resize(name_len);
    if (name_len > 0) bin::read_bytes(in, dir.name.data(), name_len, "direction name");

    if (expected_dim >= 0 && dim != expected_dim)
        throw ShapeError("direction dimension " + std::to_string(dim) + " does not match model dimension " +
                         std::to_string(expected_dim));
    if (expected_layers >= 0 && !dir.broadcast && layers != expected_layers)
        throw ShapeError("direction has " + std::to_string(layers) + " layers, model has " +
                         std::to_string(expected_layers));
    if (torch::count_nonzero(dir.direction).item<int64_t>() == 0)
        throw FormatError("direction file " + path + " holds an all-zero direction");
    return dir;
}

MappingNetworkImpl::MappingNetworkImpl(int64_t z_dim, int64_t latent_dim, int64_t layers, int64_t hidden)
    : z_dim_(z_dim), latent_dim_(latent_dim), layers_(layers) {
    fc1 = register_module("fc1", torch::nn::Linear(z_dim, hidden));
    fc2 = register_module("fc2", torch::nn::Linear(hidden, hidden));
    fc3 = register_module("fc3", torch::nn::Linear(hidden, latent_dim));
    mean_ = register_buffer("mean", torch::zeros({latent_dim}));
    whiten_ = register_buffer("whiten", torch::eye(latent_dim));
}

torch::Tensor MappingNetworkImpl::forward_w(const torch::Tensor& z) {
    if (z.size(-1) != z_dim_)
        throw ShapeError("mapping network expects z of dimension " + std::to_string(z_dim_) + ", got " +
                         std::to_string(z.size(-1)));
    auto h = torch::leaky_relu(fc1(z), 0.2);
    h = torch::leaky_relu(fc2(h), 0.2);
    h = fc3(h);
    return torch::matmul(h - mean_, whiten_.t());
}

LatentCode MappingNetworkImpl::map(const torch::Tensor& z) {
    const bool single = z.dim() == 1;
    auto w = forward_w(single ? z.unsqueeze(0) : z);
    auto codes = w.unsqueeze(1).expand({w.size(0), layers_, latent_dim_}).contiguous();
    return {single ? codes.squeeze(0) : codes};
}

void MappingNetworkImpl::fit_whitening(int64_t samples, uint64_t seed) {
    torch::NoGradGuard no_grad;
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    auto z = torch::empty({samples, z_dim_});
    auto* p = z.data_ptr<float>();
    for (int64_t i = 0; i < z.numel(); ++i) p[i] = normal(rng);

    mean_.zero_();
    whiten_.copy_(torch::eye(latent_dim_));
    auto h = forward_w(z).to(torch::kFloat64);
    auto mu = h.mean(0);
    auto centered = h - mu;
    auto cov = torch::matmul(centered.t(), centered) / static_cast<double>(samples - 1);
    auto [evals, evecs] = torch::linalg_eigh(cov);
    auto inv_sqrt = torch::rsqrt(evals.clamp_min(1e-8));
    auto zca = torch::matmul(evecs * inv_sqrt.unsqueeze(0), evecs.t());
    mean_.copy_(mu.to(torch::kFloat32));
    whiten_.copy_(zca.to(torch::kFloat32));
}

} // namespace warpres
