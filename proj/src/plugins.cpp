#include "warpres/plugins.hpp"

#include "warpres/checkpoint.hpp"

namespace warpres {

DiscriminatorFeatures::DiscriminatorFeatures(Discriminator d) : d_(std::move(d)) {
    fingerprint_ = "disc:" + module_fingerprint(*d_);
}

std::vector<torch::Tensor> DiscriminatorFeatures::features(const torch::Tensor& x) { return d_->run(x).layers; }

torch::Tensor DiscriminatorFeatures::embedding(const torch::Tensor& x) { return d_->run(x).penultimate; }

ConvIdentityEmbedder::ConvIdentityEmbedder(ConvEmbedder net) : net_(std::move(net)) {
    fingerprint_ = "conv-embedder:" + module_fingerprint(*net_);
}

std::shared_ptr<ConvIdentityEmbedder> make_identity_embedder(const ModelConfig& cfg, uint64_t seed) {
    torch::manual_seed(seed);
    ConvEmbedder net(cfg);
    freeze_module(*net);
    net->eval();
    return std::make_shared<ConvIdentityEmbedder>(net);
}

} // namespace warpres
