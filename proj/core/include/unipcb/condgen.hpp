#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unipcb/defect.hpp"
#include "unipcb/image.hpp"
#include "unipcb/tensor.hpp"

namespace unipcb::cond {

// ---- edge branch ----

/// Canny configuration. The hysteresis thresholds themselves are not stored
/// here: they are derived per image as factor * otsu_threshold(img).
struct EdgeConfig {
    double lowFactor = 0.5;
    double highFactor = 1.5;
    double gaussianSigma = 1.4;
    std::size_t gaussianRadius = 2;

    void validate() const;
};

/// Threshold maximizing the between-class variance of the 256-bin histogram;
/// ties break to the smallest threshold. A constant image returns its value.
int otsu_threshold(const GrayImage& img);

/// (low, high) hysteresis pair: factor * otsuValue clamped to [0, 255].
std::pair<double, double> canny_thresholds(int otsu_value, const EdgeConfig& cfg);

/// Full Canny pipeline (Gaussian smoothing, Sobel, 4-direction non-maximum
/// suppression, hysteresis) with thresholds adapted from the Otsu value.
/// Output pixels are exactly 0 or 255.
GrayImage adaptive_canny(const GrayImage& img, const EdgeConfig& cfg);

// ---- depth branch ----

class DepthProvider {
public:
    virtual ~DepthProvider() = default;
    /// Returns a (1,1,H,W) tensor with values in [0,1].
    virtual Tensor depth(const GrayImage& img) const = 0;
};

/// Deterministic stand-in for a learned depth model: inverted normalized
/// Gaussian-blurred intensity, so bright copper reads as near and dark
/// substrate as far.
class BlurInverseDepth : public DepthProvider {
public:
    explicit BlurInverseDepth(double sigma = 2.0) : sigma_(sigma) {}
    Tensor depth(const GrayImage& img) const override;

private:
    double sigma_;
};

// ---- text branch ----

enum class ScaleClass { Small = 0, Medium, Large };
std::string_view scale_class_name(ScaleClass s);

// Row-major 3x3 grid over normalized image coordinates.
enum class GridCell {
    TopLeft = 0, Top, TopRight,
    Left, Center, Right,
    BottomLeft, Bottom, BottomRight,
};
std::string_view grid_cell_name(GridCell c);

/// Dual area thresholds in px^2: area < t1 is small, t1 <= area <= t2 is
/// medium, area > t2 is large.
struct ScaleThresholds {
    double t1 = 1024.0;  // 32^2
    double t2 = 9216.0;  // 96^2
};

ScaleClass classify_scale(const Box& box, const ScaleThresholds& t = {});

/// Maps normalized center coordinates in [0,1]^2 onto the 3x3 grid; the
/// upper boundary clamps into the last row/column.
GridCell locate_cell(double cx, double cy);

enum class PromptMode { InstanceLevel = 0, RegionLevel };

/// Slot values for one prompt clause.
struct PromptSpec {
    DefectClass category = DefectClass::Short;
    ScaleClass scale = ScaleClass::Small;
    GridCell location = GridCell::Center;
    std::size_t quantity = 1;
    PromptMode mode = PromptMode::InstanceLevel;
};

/// Named templates with {quantity}/{scale}/{category}/{location}/
/// {distribution} placeholders. Loaded from `name=template` lines.
using TemplateLibrary = std::map<std::string, std::string>;

TemplateLibrary default_templates();
TemplateLibrary parse_templates(const std::string& text);
TemplateLibrary load_templates(const std::string& path);

struct PromptConfig {
    std::size_t countThreshold = 6;   // above this, switch to region level
    std::size_t spreadThreshold = 5;  // occupied cells at/above this read "scattered"
    ScaleThresholds scaleThresholds;
};

/// Deterministic structured prompt. At or below countThreshold each defect
/// becomes one clause in input order; above it, clauses aggregate per
/// category with a distribution word chosen by grid-cell occupancy.
std::string build_prompt(const std::vector<DefectInstance>& instances,
                         std::size_t image_w, std::size_t image_h,
                         const PromptConfig& cfg, const TemplateLibrary& templates);

/// Hash-seeded deterministic unit-norm embedding; identical prompts give
/// identical vectors.
Tensor text_embed_stub(const std::string& prompt, std::size_t dim, std::uint64_t seed);

// ---- bundle ----

struct ConditionSet {
    GrayImage edgeMap;
    Tensor depthMap;
    std::string prompt;
    Tensor textEmbedding;
};

struct CondGenConfig {
    EdgeConfig edge;
    PromptConfig prompt;
    std::size_t embedDim = 64;
    std::uint64_t embedSeed = 0;
};

/// Runs the three condition branches and bundles their outputs. Branches are
/// independent; sequential evaluation here equals any concurrent schedule.
ConditionSet generate_conditions(const GrayImage& img,
                                 const std::vector<DefectInstance>& instances,
                                 const CondGenConfig& cfg,
                                 const TemplateLibrary& templates,
                                 const DepthProvider& depth);

} // namespace unipcb::cond
