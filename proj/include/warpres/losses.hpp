#pragma once

#include <vector>

#include <torch/torch.h>

#include "warpres/plugins.hpp"
#include "warpres/types.hpp"

namespace warpres {

/// Per-sample Euclidean norms ||x1 - x|| + ||x2 - x|| (no normalisation),
/// averaged over the batch.
torch::Tensor loss_rec_l2(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x);

/// Sum over extractor layers of the same two-norm pair, batch-averaged.
torch::Tensor loss_perceptual(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x,
                              FeatureExtractor& phi);

/// (1 - <A(x), A(x1)>) + (1 - <A(x), A(x2)>), batch-averaged.
torch::Tensor loss_identity(const torch::Tensor& x_out1, const torch::Tensor& x_out2, const torch::Tensor& x,
                            IdentityEmbedder& a);

struct AdversarialTerms {
    torch::Tensor objective; // 2 log D(x) + log(1 - D(x')) + log(1 - D(x'_i)), maximised by D
    torch::Tensor loss_d;    // -objective
    torch::Tensor loss_g;    // -log D(x') - log D(x'_i)
};

/// From discriminator probabilities in (0, 1), batch-averaged.
AdversarialTerms loss_adversarial(const torch::Tensor& d_x, const torch::Tensor& d_x_prime,
                                  const torch::Tensor& d_x_i_prime);
/// Same terms from logits, evaluated with softplus for stability.
AdversarialTerms loss_adversarial_logits(const torch::Tensor& l_x, const torch::Tensor& l_x_prime,
                                         const torch::Tensor& l_x_i_prime);

/// Sum of L1 norms over the feature set.
torch::Tensor loss_feature_reg(const std::vector<torch::Tensor>& features);
/// Mean absolute value over all elements of the feature set, the form the
/// training loop weights with lambda_f.
torch::Tensor loss_feature_reg_mean(const std::vector<torch::Tensor>& features);

/// Mean absolute error over both channels and all positions.
torch::Tensor loss_flow(const FlowField& pred, const FlowField& gt);

} // namespace warpres
