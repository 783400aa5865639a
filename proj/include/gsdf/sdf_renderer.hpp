#pragma once

#include <random>
#include <vector>

#include "gsdf/sdf_field.hpp"

namespace gsdf {

struct SamplerConfig {
    double k_coarse = 3.0;
    double k_fine = 1.0;
    int samples_per_range = 32;  // M
    double near = 0.05;
    double far = 6.0;
};

enum class SampleProvenance { Guided, Stratified };

struct RaySampleSet {
    Ray ray;
    std::vector<double> t;      // strictly increasing
    std::vector<double> delta;  // t[j+1]-t[j], size |t|-1
    SampleProvenance provenance = SampleProvenance::Stratified;
};

RaySampleSet sample_ray_stratified(const Ray& ray, const SamplerConfig& cfg,
                                   int sample_count, std::mt19937_64& rng);

/// Depth-guided sampling: queries the SDF at the GS-branch depth D and emits
/// M uniform samples in each of the coarse (k_coarse) and fine (k_fine)
/// windows around D. Falls back to stratified sampling when D is unusable.
RaySampleSet sample_ray_guided(const Ray& ray, double gs_depth, const SdfField& field,
                               const SamplerConfig& cfg, std::mt19937_64& rng);

/// SDF pair -> opacity via the sharpness-parameterized logistic.
double neus_alpha(double f_i, double f_next, double sharpness);

struct VolumeRenderOutput {
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    Vec3 normal = Vec3::Zero();
    double alpha = 0.0;
    std::vector<double> weights;  // T_i * alpha_i per interval
    bool valid = false;           // false when < 2 samples
};

struct VolumeRenderContext {
    SdfField::BatchEval eval;
    std::vector<double> t;
    std::vector<double> alpha_i;  // per interval
    std::vector<double> T_i;
    Vec3 raw_normal = Vec3::Zero();
    bool normalized = false;
    double accum_alpha = 0.0;
};

VolumeRenderOutput volume_render(const RaySampleSet& samples, const SdfField& field,
                                 const Vec3& direction, VolumeRenderContext* ctx = nullptr);

/// Reverse pass for one ray; accumulates field-parameter gradients
/// (including log-sharpness) into grad_out. extra_sdf_bar/extra_grad_bar,
/// when given, add per-sample cotangents (e.g. an eikonal term on the same
/// sample points) so the field backward runs only once.
void volume_render_backward(const VolumeRenderContext& ctx, const SdfField& field,
                            const Vec3& color_bar, double depth_bar, const Vec3& normal_bar,
                            double alpha_bar, AlignedBuffer& grad_out,
                            const VecX* extra_sdf_bar = nullptr,
                            const Mat3X* extra_grad_bar = nullptr);

}  // namespace gsdf
