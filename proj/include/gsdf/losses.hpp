#pragma once

#include <random>
#include <vector>

#include "gsdf/gaussians.hpp"
#include "gsdf/image.hpp"
#include "gsdf/sdf_field.hpp"

namespace gsdf {

struct LossWeights {
    double lambda1 = 0.2;       // L1 weight inside L_g
    double lambda_vol = 0.01;
    double lambda_eik = 0.1;
    double lambda_d = 0.5;
    double lambda_n = 0.01;
    // curvature schedule: linear ramp 0 -> curv_peak over curv_ramp_iters,
    // then constant curv_after
    double curv_peak = 1.0;
    double curv_after = 0.05;
    long curv_ramp_iters = 2000;
    bool swap_l1_ssim = false;  // optional swap of the Eq.-7 weighting

    double lambda_curv_at(long iteration) const {
        if (iteration < curv_ramp_iters)
            return curv_peak * double(iteration) / double(curv_ramp_iters);
        return curv_after;
    }
};

double l1_loss(const ImageBuffer& a, const ImageBuffer& b);
/// d(l1)/da scaled by `weight`, accumulated into grad_a.
void l1_loss_backward(const ImageBuffer& a, const ImageBuffer& b, double weight,
                      ImageBuffer& grad_a);

/// Mean SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2, C2=(0.03)^2,
/// dynamic range 1; averaged over the valid (fully-covered) region and
/// channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);
/// d(mean ssim)/da scaled by `weight`, accumulated into grad_a.
void ssim_backward(const ImageBuffer& a, const ImageBuffer& b, double weight,
                   ImageBuffer& grad_a);

/// Mean over primitives of the product of decoded scales.
double volume_regularization(const GaussianSet& set);
void volume_regularization_backward(const GaussianSet& set, double weight,
                                    GaussianGrads& grads);

/// Mean of (|grad f| - 1)^2; when grad_out is given, accumulates
/// weight * d(loss)/d(params).
double eikonal_loss(const SdfField& field, const std::vector<Vec3>& points,
                    double weight = 0.0, AlignedBuffer* grad_out = nullptr);

struct CurvatureResult {
    double loss = 0.0;
    int skipped = 0;  // points with a vanishing gradient
};
CurvatureResult curvature_loss(const SdfField& field, const std::vector<Vec3>& points,
                               double epsilon, std::mt19937_64& rng, double weight = 0.0,
                               AlignedBuffer* grad_out = nullptr);
/// Variant with caller-supplied probe points (one per input point). The
/// backward pass treats probe positions as constants, so this form is the
/// one finite-difference checks can match exactly.
CurvatureResult curvature_loss_with_probes(const SdfField& field,
                                           const std::vector<Vec3>& points,
                                           const std::vector<Vec3>& probes,
                                           double weight = 0.0,
                                           AlignedBuffer* grad_out = nullptr);

struct MutualLossResult {
    double value = 0.0;
    double depth_term = 0.0;   // unweighted mean |D_gs - D_s|
    double normal_term = 0.0;  // unweighted mean (1 - |cos|)
    int mask_pixels = 0;
};

MutualLossResult mutual_loss(const ImageBuffer& d_gs, const ImageBuffer& d_s,
                             const ImageBuffer& n_gs, const ImageBuffer& n_s,
                             const ImageBuffer& mask, const LossWeights& w);

/// Gradients of the weighted mutual loss w.r.t. all four input maps,
/// accumulated into the given buffers (any may be empty-sized to skip).
void mutual_loss_backward(const ImageBuffer& d_gs, const ImageBuffer& d_s,
                          const ImageBuffer& n_gs, const ImageBuffer& n_s,
                          const ImageBuffer& mask, const LossWeights& w,
                          ImageBuffer& d_gs_bar, ImageBuffer& d_s_bar,
                          ImageBuffer& n_gs_bar, ImageBuffer& n_s_bar);

struct TotalLosses {
    double l_g = 0.0;
    double l_s = 0.0;
    double l_mutual = 0.0;
    double total = 0.0;
};

TotalLosses total_losses(double l1_gs, double ssim_loss, double l_vol, double l1_sdf,
                         double l_eik, double l_curv, double lambda_curv,
                         double l_mutual, const LossWeights& w);

}  // namespace gsdf
