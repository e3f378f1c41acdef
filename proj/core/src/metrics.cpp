#include "unipcb/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "unipcb/errors.hpp"

namespace unipcb::metrics {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdTol = -1e-8;
constexpr double kFidFloor = -1e-6;
constexpr double kNormGuard = 1e-10;

Eigen::MatrixXd to_eigen(const Tensor& t) {
    const std::size_t d = t.dim(0);
    Eigen::MatrixXd m(d, d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) = t.at2(r, c);
    return m;
}

void check_symmetric(const Tensor& cov, const char* what) {
    const std::size_t d = cov.dim(0);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r + 1; c < d; ++c)
            if (std::fabs(cov.at2(r, c) - cov.at2(c, r)) > kSymmetryTol)
                throw ValidationError(std::string(what) + ": covariance not symmetric at (" +
                                      std::to_string(r) + "," + std::to_string(c) + ")");
}

// Eigenvalues in ascending order; matrix symmetrized first for stability.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_sym(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    return solver;
}

} // namespace

FeatureStats FeatureStats::from_samples(const Tensor& samples) {
    if (samples.rank() != 2) throw DimensionError("from_samples: expected (n, d) samples");
    const std::size_t n = samples.dim(0);
    const std::size_t d = samples.dim(1);
    if (n < 2) throw ValidationError("from_samples: need at least 2 samples for unbiased covariance");
    samples.assert_finite("from_samples");

    FeatureStats st;
    st.mean = Tensor::zeros({d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += samples.at2(i, j);
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(n);

    st.cov = Tensor::zeros({d, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < d; ++r) {
            const double dr = samples.at2(i, r) - st.mean[r];
            for (std::size_t c = r; c < d; ++c)
                st.cov.at2(r, c) += dr * (samples.at2(i, c) - st.mean[c]);
        }
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r; c < d; ++c) {
            st.cov.at2(r, c) /= denom;
            st.cov.at2(c, r) = st.cov.at2(r, c);
        }
    return st;
}

void FeatureStats::validate() const {
    if (mean.rank() != 1) throw DimensionError("FeatureStats: mean must be rank 1");
    if (cov.rank() != 2 || cov.dim(0) != cov.dim(1))
        throw DimensionError("FeatureStats: covariance must be square");
    if (cov.dim(0) != mean.dim(0))
        throw DimensionError("FeatureStats: mean/covariance dimension mismatch");
    mean.assert_finite("FeatureStats.mean");
    cov.assert_finite("FeatureStats.cov");
    check_symmetric(cov, "FeatureStats");
    const auto solver = eig_sym(to_eigen(cov));
    if (solver.eigenvalues()(0) < kPsdTol)
        throw ValidationError("FeatureStats: covariance not positive semi-definite (min eigenvalue " +
                              std::to_string(solver.eigenvalues()(0)) + ")");
}

double fid(const FeatureStats& real, const FeatureStats& gen) {
    real.validate();
    gen.validate();
    if (real.dim() != gen.dim()) throw DimensionError("fid: feature dimension mismatch");
    const std::size_t d = real.dim();

    double mean_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = real.mean[j] - gen.mean[j];
        mean_term += diff * diff;
    }

    const Eigen::MatrixXd sr = to_eigen(real.cov);
    const Eigen::MatrixXd sg = to_eigen(gen.cov);

    const auto er = eig_sym(sr);
    Eigen::VectorXd root = er.eigenvalues();
    for (Eigen::Index i = 0; i < root.size(); ++i) root(i) = std::sqrt(std::max(root(i), 0.0));
    const Eigen::MatrixXd sr_half = er.eigenvectors() * root.asDiagonal() * er.eigenvectors().transpose();

    // tr(sqrt(Sr Sg)) equals the sum of square roots of the eigenvalues of
    // the symmetric product Sr^1/2 Sg Sr^1/2.
    const auto em = eig_sym(sr_half * sg * sr_half);
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < em.eigenvalues().size(); ++i)
        trace_sqrt += std::sqrt(std::max(em.eigenvalues()(i), 0.0));

    const double value = mean_term + sr.trace() + sg.trace() - 2.0 * trace_sqrt;
    if (!std::isfinite(value)) throw NumericError("fid: non-finite result");
    if (value < kFidFloor)
        throw NumericError("fid: result " + std::to_string(value) + " below tolerance floor");
    return std::max(value, 0.0);
}

double lpips_form(const LpipsLayers& layers) {
    if (layers.layers.empty()) throw ValidationError("lpips_form: no layers");
    double total = 0.0;
    for (std::size_t li = 0; li < layers.layers.size(); ++li) {
        const auto& layer = layers.layers[li];
        if (layer.weight < 0.0)
            throw ValidationError("lpips_form: negative weight at layer " + std::to_string(li));
        const Tensor& fx = layer.fx;
        const Tensor& fy = layer.fy;
        if (fx.rank() != 4 || fx.dim(0) != 1)
            throw DimensionError("lpips_form: features must be (1,C,H,W)");
        if (!fx.same_shape(fy)) throw DimensionError("lpips_form: feature shape mismatch");
        fx.assert_finite("lpips_form.fx");
        fy.assert_finite("lpips_form.fy");

        const std::size_t c = fx.dim(1), h = fx.dim(2), w = fx.dim(3);
        double layer_sum = 0.0;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                double nx = 0.0, ny = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    nx += fx.at4(0, ch, y, x) * fx.at4(0, ch, y, x);
                    ny += fy.at4(0, ch, y, x) * fy.at4(0, ch, y, x);
                }
                nx = std::sqrt(nx) + kNormGuard;
                ny = std::sqrt(ny) + kNormGuard;
                double site = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double diff = fx.at4(0, ch, y, x) / nx - fy.at4(0, ch, y, x) / ny;
                    site += diff * diff;
                }
                layer_sum += site;
            }
        }
        total += layer.weight * layer_sum / static_cast<double>(h * w);
    }
    return total;
}

double psnr(const Tensor& x, const Tensor& y, double max_val) {
    if (!x.same_shape(y)) throw DimensionError("psnr: shape mismatch");
    if (!(max_val > 0.0)) throw ValidationError("psnr: maxVal must be positive");
    x.assert_finite("psnr.x");
    y.assert_finite("psnr.y");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

double psnr(const GrayImage& x, const GrayImage& y, double max_val) {
    return psnr(image_to_tensor(x), image_to_tensor(y), max_val);
}

void SsimConfig::validate() const {
    if (!(C1 > 0.0) || !(C2 > 0.0)) throw ValidationError("ssim: C1 and C2 must be positive");
    if (windowSize == 0) throw ValidationError("ssim: windowSize must be positive");
    if (!(dynamicRange > 0.0)) throw ValidationError("ssim: dynamicRange must be positive");
    if (gaussianWindow && !(gaussianSigma > 0.0))
        throw ValidationError("ssim: gaussianSigma must be positive");
}

namespace {

double ssim_window(const Tensor& x, const Tensor& y, std::size_t y0, std::size_t x0,
                   std::size_t wh, std::size_t ww, const std::vector<double>& weights,
                   const SsimConfig& cfg) {
    double mx = 0.0, my = 0.0;
    std::size_t k = 0;
    for (std::size_t dy = 0; dy < wh; ++dy)
        for (std::size_t dx = 0; dx < ww; ++dx, ++k) {
            mx += weights[k] * x.at2(y0 + dy, x0 + dx);
            my += weights[k] * y.at2(y0 + dy, x0 + dx);
        }
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    k = 0;
    for (std::size_t dy = 0; dy < wh; ++dy)
        for (std::size_t dx = 0; dx < ww; ++dx, ++k) {
            const double ax = x.at2(y0 + dy, x0 + dx) - mx;
            const double ay = y.at2(y0 + dy, x0 + dx) - my;
            vx += weights[k] * ax * ax;
            vy += weights[k] * ay * ay;
            cxy += weights[k] * ax * ay;
        }
    const double num = (2.0 * mx * my + cfg.C1) * (2.0 * cxy + cfg.C2);
    const double den = (mx * mx + my * my + cfg.C1) * (vx + vy + cfg.C2);
    return num / den;
}

} // namespace

double ssim(const Tensor& x, const Tensor& y, const SsimConfig& cfg) {
    cfg.validate();
    if (x.rank() != 2) throw DimensionError("ssim: expected (H,W) inputs");
    if (!x.same_shape(y)) throw DimensionError("ssim: shape mismatch");
    x.assert_finite("ssim.x");
    y.assert_finite("ssim.y");
    const std::size_t h = x.dim(0), w = x.dim(1);

    std::size_t wh, ww;
    if (cfg.globalWindow) {
        wh = h;
        ww = w;
    } else {
        if (h < cfg.windowSize || w < cfg.windowSize)
            throw ValidationError("ssim: image smaller than window; use globalWindow");
        wh = ww = cfg.windowSize;
    }

    // Normalized window weights; population statistics under these weights.
    std::vector<double> weights(wh * ww);
    if (cfg.gaussianWindow) {
        const double cy = (static_cast<double>(wh) - 1.0) / 2.0;
        const double cx = (static_cast<double>(ww) - 1.0) / 2.0;
        double sum = 0.0;
        std::size_t k = 0;
        for (std::size_t dy = 0; dy < wh; ++dy)
            for (std::size_t dx = 0; dx < ww; ++dx, ++k) {
                const double ry = static_cast<double>(dy) - cy;
                const double rx = static_cast<double>(dx) - cx;
                weights[k] = std::exp(-(ry * ry + rx * rx) / (2.0 * cfg.gaussianSigma * cfg.gaussianSigma));
                sum += weights[k];
            }
        for (double& v : weights) v /= sum;
    } else {
        std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(wh * ww));
    }

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + wh <= h; ++y0)
        for (std::size_t x0 = 0; x0 + ww <= w; ++x0, ++count)
            total += ssim_window(x, y, y0, x0, wh, ww, weights, cfg);
    return total / static_cast<double>(count);
}

double ssim(const GrayImage& x, const GrayImage& y, const SsimConfig& cfg) {
    x.validate();
    y.validate();
    Tensor tx = Tensor::zeros({x.height, x.width});
    Tensor ty = Tensor::zeros({y.height, y.width});
    for (std::size_t i = 0; i < x.data.size(); ++i) tx[i] = static_cast<double>(x.data[i]);
    for (std::size_t i = 0; i < y.data.size(); ++i) ty[i] = static_cast<double>(y.data[i]);
    return ssim(tx, ty, cfg);
}

} // namespace unipcb::metrics
