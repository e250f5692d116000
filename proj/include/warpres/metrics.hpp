#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

#include "warpres/plugins.hpp"

namespace warpres {

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), rows are samples.
///
/// The cross term is the sum of singular values of S_b^{1/2} S_a^{1/2}, with
/// the factors from symmetric eigendecompositions in which eigenvalues below
/// 1e-10 count as zero.
double frechet_distance(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);
double frechet_distance(const torch::Tensor& feats_a, const torch::Tensor& feats_b);

Eigen::MatrixXd to_eigen(const torch::Tensor& t);

/// Windowed SSIM (11x11 Gaussian, sigma 1.5, valid windows), averaged over
/// windows, channels and batch. `data_range` is 2 for images in [-1, 1].
double ssim(const torch::Tensor& x, const torch::Tensor& y, double data_range = 2.0);

/// Layer-averaged mean squared feature difference, batch-averaged.
double perceptual_distance(const torch::Tensor& x, const torch::Tensor& y, FeatureExtractor& phi);

/// Mean cosine similarity of the embeddings.
double id_score(const torch::Tensor& x, const torch::Tensor& y, IdentityEmbedder& a);

} // namespace warpres
