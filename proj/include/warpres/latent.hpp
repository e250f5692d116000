#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <torch/torch.h>

namespace warpres {

/// Per-layer style codes (the W+ representation).
///
/// `codes` is either [L, D] or batched [N, L, D]. Arithmetic between two
/// codes requires identical trailing (L, D).
struct LatentCode {
    torch::Tensor codes;

    int64_t layers() const { return codes.size(-2); }
    int64_t dim() const { return codes.size(-1); }
    bool batched() const { return codes.dim() == 3; }
    int64_t batch() const { return batched() ? codes.size(0) : 1; }
};

struct LatentSeed {
    torch::Tensor z; // [D_z], float32
    uint64_t rng_seed = 0;
};

/// A W+ direction. A broadcast direction stores a single [1, D] row that is
/// applied to every style layer.
struct EditDirection {
    torch::Tensor direction; // [L, D] or [1, D] when broadcast
    bool broadcast = false;
    std::string name;
    float default_strength = 1.0F;

    /// [L, D] view of the direction for a model with `layers` style layers.
    torch::Tensor effective(int64_t layers) const;
};

void check_latent(const LatentCode& w, int64_t layers, int64_t dim);
void check_same_shape(const LatentCode& a, const LatentCode& b);

/// z ~ N(0, I) of dimension `z_dim`, a pure function of `rng_seed`.
LatentSeed sample_z(uint64_t rng_seed, int64_t z_dim = 64);

/// w + alpha (w_r - w). `alpha` is a scalar or one value per batch entry.
LatentCode simulate_edit(const LatentCode& w, const LatentCode& w_r, double alpha);
LatentCode simulate_edit(const LatentCode& w, const LatentCode& w_r, const torch::Tensor& alpha);

/// Returns 0 with probability 1 - edit_probability, otherwise U(0.4, 0.5).
double sample_edit_alpha(std::mt19937_64& rng, double edit_probability);

/// w_enc - alpha * direction, the step back along the forward edit.
LatentCode reverse_edit(const LatentCode& w_enc, const LatentCode& direction, double alpha);
LatentCode reverse_edit(const LatentCode& w_enc, const LatentCode& direction, const torch::Tensor& alpha);

/// w + strength * dir; strength == 0 returns w unchanged.
LatentCode apply_direction(const LatentCode& w, const EditDirection& dir, double strength);

/// Direction file I/O. `expected_layers`/`expected_dim` < 0 skip the check.
EditDirection load_direction(const std::string& path, int64_t expected_layers = -1, int64_t expected_dim = -1);
void save_direction(const EditDirection& dir, const std::string& path);

/// StyleGAN-style mapping network z -> w, broadcast to every style layer.
///
/// The procedural substrate whitens the MLP output with statistics frozen at
/// construction so that w has approximately zero mean and identity covariance.
class MappingNetworkImpl : public torch::nn::Module {
public:
    MappingNetworkImpl(int64_t z_dim, int64_t latent_dim, int64_t layers, int64_t hidden = 64);

    /// z: [N, D_z] -> [N, D]
    torch::Tensor forward_w(const torch::Tensor& z);
    /// z: [N, D_z] or [D_z] -> W+ code [N, L, D] (or [L, D])
    LatentCode map(const torch::Tensor& z);

    /// Estimate mean and ZCA whitening from `samples` draws of z.
    void fit_whitening(int64_t samples, uint64_t seed);

    int64_t z_dim() const { return z_dim_; }
    int64_t latent_dim() const { return latent_dim_; }
    int64_t layers() const { return layers_; }

private:
    int64_t z_dim_;
    int64_t latent_dim_;
    int64_t layers_;
    torch::nn::Linear fc1{nullptr}, fc2{nullptr}, fc3{nullptr};
    torch::Tensor mean_;
    torch::Tensor whiten_;
};
TORCH_MODULE(MappingNetwork);

} // namespace warpres
