#pragma once

#include <optional>
#include <vector>

#include "gsdf/gaussians.hpp"
#include "gsdf/image.hpp"

namespace gsdf {

constexpr double kCovFloor = 0.3;             // px^2 isotropic low-pass floor
constexpr double kTransmittanceCutoff = 1e-4;  // blending termination
constexpr int kTileSize = 16;

struct Splat2D {
    Vec2 mean2d;
    Mat2 cov2d;       // includes the low-pass floor
    Mat2 conic;       // cov2d^{-1}
    double depth;     // camera-space z
    double opacity;   // decoded
    Vec3 color;       // decoded
    Vec3 normal;      // camera-facing
    int source_index;
    double radius;    // 3-sigma bound in pixels
    // cached for backward
    Vec3 p_cam;
    double normal_sign;
    int normal_axis;
};

std::optional<Splat2D> project_gaussian(const GaussianPrimitive& g, const Camera& camera,
                                        int source_index);

struct RasterOutput {
    ImageBuffer color;   // 3ch
    ImageBuffer depth;   // 1ch
    ImageBuffer normal;  // 3ch
    ImageBuffer alpha;   // 1ch
    std::vector<double> per_primitive_grad;     // filled by backward
    std::vector<double> per_primitive_opacity;  // mean blend weight over pixels touched
};

struct RasterContext {
    Camera camera;
    std::vector<Splat2D> splats;               // depth-sorted, culled removed
    std::vector<std::vector<int>> tile_bins;   // indices into `splats`
    int tiles_x = 0, tiles_y = 0;
    size_t primitive_count = 0;
    bool valid = false;
};

RasterOutput rasterize(const GaussianSet& set, const Camera& camera,
                       RasterContext* ctx = nullptr);

/// Analytic backward through blending, the 2D Gaussian, EWA projection and
/// covariance construction. output_grad buffers may be empty (treated as
/// zero). Also fills out.per_primitive_grad with ‖dL/d(mean2d)‖ per
/// primitive for density-control statistics.
void rasterize_backward(const RasterContext& ctx, const ImageBuffer& color_bar,
                        const ImageBuffer& depth_bar, const ImageBuffer& normal_bar,
                        const ImageBuffer& alpha_bar, const GaussianSet& set,
                        GaussianGrads& grads, std::vector<double>& per_primitive_grad);

}  // namespace gsdf
