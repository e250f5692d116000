#pragma once

#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "warpres/generator.hpp"

namespace warpres {

/// Multi-layer feature extractor used by the perceptual loss and the
/// perceptual distance metric.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<torch::Tensor> features(const torch::Tensor& x) = 0;
    virtual std::string fingerprint() const = 0;
};

/// Unit-norm embedding used by the identity loss and the Id score.
class IdentityEmbedder {
public:
    virtual ~IdentityEmbedder() = default;
    virtual torch::Tensor embed(const torch::Tensor& x) = 0; // [N, E], unit rows
    virtual std::string fingerprint() const = 0;
};

/// Single layer: the image itself.
class IdentityExtractor : public FeatureExtractor {
public:
    std::vector<torch::Tensor> features(const torch::Tensor& x) override { return {x}; }
    std::string fingerprint() const override { return "identity"; }
};

/// Convolutional activations of a (frozen) discriminator.
class DiscriminatorFeatures : public FeatureExtractor {
public:
    explicit DiscriminatorFeatures(Discriminator d);
    std::vector<torch::Tensor> features(const torch::Tensor& x) override;
    std::string fingerprint() const override { return fingerprint_; }

    /// Penultimate-layer vectors, the Frechet-distance feature space. [N, 64]
    torch::Tensor embedding(const torch::Tensor& x);

private:
    Discriminator d_;
    std::string fingerprint_;
};

class ConvIdentityEmbedder : public IdentityEmbedder {
public:
    explicit ConvIdentityEmbedder(ConvEmbedder net);
    torch::Tensor embed(const torch::Tensor& x) override { return net_->forward(x); }
    std::string fingerprint() const override { return fingerprint_; }

private:
    ConvEmbedder net_;
    std::string fingerprint_;
};

/// Frozen random embedder built from `seed`.
std::shared_ptr<ConvIdentityEmbedder> make_identity_embedder(const ModelConfig& cfg, uint64_t seed);

} // namespace warpres
