#include "warpres/losses.hpp"

#include "warpres/errors.hpp"

namespace warpres {

namespace {

void same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes())
        throw ShapeError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
}

// Per-sample Euclidean norm; the backward pass is zero where the norm is zero.
torch::Tensor sample_norm(const torch::Tensor& d) {
    return at::linalg_vector_norm(d.flatten(1), 2, {1}, false, c10::nullopt);
}

torch::Tensor batched(const torch::Tensor& x) { return x.dim() == 3 ? x.unsqueeze(0) : x; }

} // namespace

torch::Tensor loss_rec_l2(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x) {
    same_shape(x_out1, x, "loss_rec_l2");
    same_shape(x_out2, x, "loss_rec_l2");
    auto t = batched(x);
    return (sample_norm(batched(x_out1) - t) + sample_norm(batched(x_out2) - t)).mean();
}

torch::Tensor loss_perceptual(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x,
                              FeatureExtractor& phi) {
    same_shape(x_out1, x, "loss_perceptual");
    same_shape(x_out2, x, "loss_perceptual");
    const auto f1 = phi.features(batched(x_out1));
    const auto f2 = phi.features(batched(x_out2));
    const auto f = phi.features(batched(x));
    if (f1.size() != f.size() || f2.size() != f.size() || f.empty())
        throw Error("loss_perceptual: extractor returned inconsistent layer sets");
    auto total = torch::zeros({}, x.options());
    for (std::size_t j = 0; j < f.size(); ++j) total = total + (sample_norm(f1[j] - f[j]) + sample_norm(f2[j] - f[j])).mean();
    return total;
}

torch::Tensor loss_identity(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x,
                            IdentityEmbedder& a) {
    same_shape(x_out1, x, "loss_identity");
    same_shape(x_out2, x, "loss_identity");
    auto e = a.embed(batched(x));
    auto e1 = a.embed(batched(x_out1));
    auto e2 = a.embed(batched(x_out2));
    return ((1.0 - (e * e1).sum(1)) + (1.0 - (e * e2).sum(1))).mean();
}

AdversarialTerms loss_adversarial(const torch::Tensor& d_x, const torch::Tensor& d_x_prime,
                                  const torch::Tensor& d_x_i_prime) {
    AdversarialTerms t;
    t.objective = (2.0 * torch::log(d_x) + torch::log1p(-d_x_prime) + torch::log1p(-d_x_i_prime)).mean();
    t.loss_d = -t.objective;
    t.loss_g = (-torch::log(d_x_prime) - torch::log(d_x_i_prime)).mean();
    return t;
}

AdversarialTerms loss_adversarial_logits(const torch::Tensor& l_x, const torch::Tensor& l_x_prime,
                                         const torch::Tensor& l_x_i_prime) {
    // log sigmoid(l) = -softplus(-l), log(1 - sigmoid(l)) = -softplus(l)
    namespace F = torch::nn::functional;
    AdversarialTerms t;
    t.objective = (-2.0 * F::softplus(-l_x) - F::softplus(l_x_prime) - F::softplus(l_x_i_prime)).mean();
    t.loss_d = -t.objective;
    t.loss_g = (F::softplus(-l_x_prime) + F::softplus(-l_x_i_prime)).mean();
    return t;
}

torch::Tensor loss_feature_reg(const std::vector<torch::Tensor>& features) {
    if (features.empty()) return torch::zeros({});
    auto total = torch::zeros({}, features.front().options());
    for (const auto& f : features) total = total + f.abs().sum();
    return total;
}

torch::Tensor loss_feature_reg_mean(const std::vector<torch::Tensor>& features) {
    if (features.empty()) return torch::zeros({});
    auto total = torch::zeros({}, features.front().options());
    int64_t count = 0;
    for (const auto& f : features) {
        total = total + f.abs().sum();
        count += f.numel();
    }
    return total / static_cast<double>(std::max<int64_t>(count, 1));
}

torch::Tensor loss_flow(const FlowField& pred, const FlowField& gt) {
    same_shape(pred.data, gt.data, "loss_flow");
    return (pred.data - gt.data).abs().mean();
}

} // namespace warpres
