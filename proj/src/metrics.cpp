#include "warpres/metrics.hpp"

#include <cmath>

#include "warpres/errors.hpp"

namespace warpres {

namespace F = torch::nn::functional;

namespace {

constexpr double kEigenFloor = 1e-10;

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
    const Eigen::MatrixXd c = x.rowwise() - mu;
    return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw Error("frechet_distance: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] < kEigenFloor ? 0.0 : std::sqrt(ev[i]);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

torch::Tensor batched(const torch::Tensor& x) { return x.dim() == 3 ? x.unsqueeze(0) : x; }

} // namespace

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
    if (c.dim() == 1) c = c.unsqueeze(1);
    if (c.dim() != 2) throw ShapeError("expected a [samples, dims] feature matrix");
    Eigen::MatrixXd m(c.size(0), c.size(1));
    auto acc = c.accessor<double, 2>();
    for (int64_t i = 0; i < c.size(0); ++i)
        for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = acc[i][j];
    return m;
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() < 2 || b.rows() < 2) throw Error("frechet_distance needs at least 2 samples per set");
    if (a.cols() != b.cols())
        throw ShapeError("frechet_distance: feature dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
    const Eigen::RowVectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
    const Eigen::MatrixXd sa = covariance(a, mu_a), sb = covariance(b, mu_b);
    // Tr (S_a^1/2 S_b S_a^1/2)^1/2 is the nuclear norm of S_b^1/2 S_a^1/2. Singular values avoid the
    // square root of a near-singular product, which loses half the digits.
    const Eigen::MatrixXd prod = sqrt_psd(sb) * sqrt_psd(sa);
    const double cross = Eigen::BDCSVD<Eigen::MatrixXd>(prod).singularValues().sum();
    const double fd = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross;
    if (!std::isfinite(fd)) throw Error("frechet_distance: non-finite result");
    return std::max(fd, 0.0);
}

double frechet_distance(const torch::Tensor& a, const torch::Tensor& b) {
    return frechet_distance(to_eigen(a), to_eigen(b));
}

double ssim(const torch::Tensor& x_in, const torch::Tensor& y_in, double data_range) {
    if (x_in.sizes() != y_in.sizes()) throw ShapeError("ssim: shape mismatch");
    torch::NoGradGuard no_grad;
    auto x = batched(x_in).detach().to(torch::kFloat64);
    auto y = batched(y_in).detach().to(torch::kFloat64);
    const int64_t c = x.size(1);
    auto g = torch::exp(-torch::pow(torch::arange(-5, 6, torch::kFloat64), 2) / (2.0 * 1.5 * 1.5));
    g = g / g.sum();
    auto window = torch::outer(g, g).view({1, 1, 11, 11}).expand({c, 1, 11, 11}).contiguous();
    auto blur = [&](const torch::Tensor& t) { return F::conv2d(t, window, F::Conv2dFuncOptions().groups(c)); };
    const double c1 = std::pow(0.01 * data_range, 2), c2 = std::pow(0.03 * data_range, 2);
    auto mx = blur(x), my = blur(y);
    auto sxx = blur(x * x) - mx * mx;
    auto syy = blur(y * y) - my * my;
    auto sxy = blur(x * y) - mx * my;
    auto map = ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    return map.mean().item<double>();
}

double perceptual_distance(const torch::Tensor& x, const torch::Tensor& y, FeatureExtractor& phi) {
    if (x.sizes() != y.sizes()) throw ShapeError("perceptual_distance: shape mismatch");
    torch::NoGradGuard no_grad;
    const auto fx = phi.features(batched(x)), fy = phi.features(batched(y));
    if (fx.empty() || fx.size() != fy.size()) throw Error("perceptual_distance: extractor returned no layers");
    double total = 0.0;
    for (std::size_t j = 0; j < fx.size(); ++j) total += (fx[j] - fy[j]).to(torch::kFloat64).pow(2).mean().item<double>();
    return total / static_cast<double>(fx.size());
}

double id_score(const torch::Tensor& x, const torch::Tensor& y, IdentityEmbedder& a) {
    if (x.sizes() != y.sizes()) throw ShapeError("id_score: shape mismatch");
    torch::NoGradGuard no_grad;
    auto ex = a.embed(batched(x)).to(torch::kFloat64), ey = a.embed(batched(y)).to(torch::kFloat64);
    return (ex * ey).sum(1).clamp(-1.0, 1.0).mean().item<double>();
}

} // namespace warpres
