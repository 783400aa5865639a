#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsdf/camera.hpp"

namespace gsdf {

constexpr double kLogScaleFloor = -10.0;  // keeps covariance invertible

/// Raw (trainable) storage of one primitive. Scales are log-encoded,
/// opacity and color pre-sigmoid.
struct GaussianPrimitive {
    Vec3 mean = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 quat = Vec4(1, 0, 0, 0);  // (w,x,y,z); normalized on decode
    double opacity_logit = 0.0;
    Vec3 color_logit = Vec3::Zero();
};

struct DecodedGaussian {
    Vec3 mean;
    Vec3 scale;
    Mat3 rotation;
    double opacity;
    Vec3 color;
};

struct DensityStats {
    double grad_accum = 0.0;     // running mean of screen-space grad magnitude
    double opacity_accum = 0.0;  // running mean of rendered opacity contribution
    int count = 0;

    void reset() { *this = DensityStats{}; }
};

struct GaussianSet {
    std::vector<GaussianPrimitive> primitives;
    std::vector<DensityStats> stats;

    size_t size() const { return primitives.size(); }
    void resize_stats() { stats.resize(primitives.size()); }
};

/// Parallel gradient buffers for a GaussianSet.
struct GaussianGrads {
    std::vector<Vec3> mean, log_scale, color_logit;
    std::vector<Vec4> quat;
    std::vector<double> opacity_logit;

    void resize(size_t n);
    void zero();
};

DecodedGaussian decode(const GaussianPrimitive& g);
Mat3 quat_to_rotation(const Vec4& q_unnormalized);
/// Reverse of decode's rotation: accumulates d(loss)/d(stored quat) from
/// d(loss)/d(rotation matrix).
Vec4 quat_rotation_backward(const Vec4& q_stored, const Mat3& R_bar);

Mat3 covariance(const Vec3& scale, const Vec4& quat);
double gaussian_value(const DecodedGaussian& g, const Vec3& x);

/// Axis of the smallest scale (ties broken x<y<z), optionally flipped to
/// face `camera_pos`.
Vec3 normal_of(const DecodedGaussian& g, const Vec3* camera_pos = nullptr);
int smallest_scale_axis(const Vec3& scale);

void accumulate_stats(GaussianSet& set, const std::vector<double>& per_primitive_grad,
                      const std::vector<double>& per_primitive_opacity);

// Initialization modes: random in a box, or jittered surface points.
GaussianSet init_random_in_box(int count, const Vec3& box_min, const Vec3& box_max,
                               double scale_init, std::mt19937_64& rng);
GaussianSet init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                             double jitter, double scale_init, std::mt19937_64& rng);

// PLY point-cloud dump with custom per-vertex properties; see docs/formats.md.
void save_ply(const std::string& path, const GaussianSet& set);
GaussianSet load_ply(const std::string& path);

void save_gaussians(std::ostream& os, const GaussianSet& set);  // binary, bit-exact
GaussianSet load_gaussians(std::istream& is);

}  // namespace gsdf
