#pragma once

#include <vector>

#include "unipcb/image.hpp"
#include "unipcb/tensor.hpp"

namespace unipcb::metrics {

/// Gaussian fit of a feature distribution: mean vector (d) and covariance
/// matrix (d,d). The covariance must be symmetric and positive
/// semi-definite within -1e-8 on its smallest eigenvalue.
struct FeatureStats {
    Tensor mean;
    Tensor cov;

    /// Sample mean and unbiased covariance from (n, d) rows, n >= 2.
    static FeatureStats from_samples(const Tensor& samples);

    std::size_t dim() const { return mean.dim(0); }
    void validate() const;
};

/// Frechet distance between two Gaussian fits. The matrix square root uses
/// the symmetric form sqrt(Sr^1/2 Sg Sr^1/2) via eigendecomposition with
/// negative eigenvalues clamped to zero; the result is clamped to >= 0 and
/// values below -1e-6 raise NumericError.
double fid(const FeatureStats& real, const FeatureStats& gen);

/// Per-layer feature pairs with non-negative weights.
struct LpipsLayers {
    struct Layer {
        Tensor fx;  // (1,C,H,W)
        Tensor fy;
        double weight = 1.0;
    };
    std::vector<Layer> layers;
};

/// Weighted sum over layers of the spatial average of squared differences
/// between channel-unit-normalized feature vectors (norm guard 1e-10).
double lpips_form(const LpipsLayers& layers);

/// 10*log10(maxVal^2 / MSE) in dB; identical inputs give +infinity.
double psnr(const Tensor& x, const Tensor& y, double max_val);
double psnr(const GrayImage& x, const GrayImage& y, double max_val = 255.0);

struct SsimConfig {
    double C1 = 6.5025;     // (0.01 * 255)^2
    double C2 = 58.5225;    // (0.03 * 255)^2
    std::size_t windowSize = 8;
    double dynamicRange = 255.0;
    bool globalWindow = false;    // one window spanning the whole image
    bool gaussianWindow = false;  // Gaussian weights instead of uniform
    double gaussianSigma = 1.5;

    void validate() const;
};

/// Mean structural similarity over sliding windows (stride 1). Inputs are
/// (H,W) tensors; images at least windowSize on each side unless
/// globalWindow is set.
double ssim(const Tensor& x, const Tensor& y, const SsimConfig& cfg = {});
double ssim(const GrayImage& x, const GrayImage& y, const SsimConfig& cfg = {});

} // namespace unipcb::metrics
