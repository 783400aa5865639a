#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gsdf/camera.hpp"

namespace gsdf {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Mat3X = Eigen::Matrix3Xd;

/// Flat parameter/gradient storage that Eigen maps into. The allocator pins
/// the base address alignment, which keeps vectorized kernel results
/// bit-identical across allocations (plain std::vector can land on different
/// 16/32-byte phases run to run, changing summation order in Eigen kernels).
using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct HashGridConfig {
    int levels = 16;
    int base_resolution = 32;    // cells per axis, coarsest level
    int max_resolution = 2048;   // cells per axis, finest level
    int feature_dim = 4;
    uint32_t table_size = 1u << 15;  // desk-scale default; paper-scale 1<<21

    double growth_factor() const;
    int resolution(int level) const;  // cells per axis at `level`
};

struct SdfFieldConfig {
    HashGridConfig grid;
    int hidden_width = 64;
    int geo_feature_dim = 15;
    bool sphere_prior = true;        // additive analytic sphere bias at init
    double sphere_radius_frac = 0.4; // fraction of domain half-extent
    double init_sharpness = 10.0;
    Vec3 domain_min = Vec3(-1, -1, -1);
    Vec3 domain_max = Vec3(1, 1, 1);
};

struct ProgressiveSchedule {
    int initial_active_levels = 4;
    int step_iterations = 2000;
};

int activate_levels(const ProgressiveSchedule& sched, int levels, long iteration);

/// Uniform random unit tangent step: returns x + epsilon*t with t orthogonal
/// to `normal`.
Vec3 tangent_perturb(const Vec3& x, const Vec3& normal, double epsilon,
                     std::mt19937_64& rng);

/// Multi-resolution hash-grid SDF with MLP heads. All trainable parameters
/// live in one flat vector (grid features, sdf head, color head,
/// log-sharpness); `grads` is the matching accumulation buffer.
class SdfField {
public:
    SdfField() = default;
    SdfField(const SdfFieldConfig& cfg, uint64_t seed);

    const SdfFieldConfig& config() const { return cfg_; }
    int enc_dim() const { return cfg_.grid.levels * cfg_.grid.feature_dim; }
    int in_dim() const { return 3 + enc_dim(); }
    int active_levels = 1;

    size_t param_count() const { return params.size(); }
    size_t grid_param_count() const { return grid_size_; }
    size_t mlp_param_count() const { return mlp_size_; }
    size_t sharpness_index() const { return grid_size_ + mlp_size_; }
    double sharpness() const { return std::exp(params[sharpness_index()]); }

    AlignedBuffer params;
    AlignedBuffer grads;
    void zero_grad();

    // Point queries (thread-safe given frozen params).
    VecX encode(const Vec3& x) const;
    double sdf_value(const Vec3& x) const;
    Vec3 sdf_gradient(const Vec3& x) const;

    /// Forward over a batch of points (one ray's samples, or a loose point
    /// set). Retains the context needed by backward(). `dir` may be null
    /// when colors are not needed.
    struct BatchEval;
    void eval(const std::vector<Vec3>& xs, const Vec3* dir, BatchEval& out) const;

    /// Reverse pass. Accumulates parameter gradients into `grad_out`
    /// (layout identical to `params`). grad_bar rows are d(loss)/d(∇f);
    /// color_bar is ignored when the forward had no direction.
    void backward(const BatchEval& ctx, const VecX& sdf_bar, const Mat3X& grad_bar,
                  const Mat3X& color_bar, AlignedBuffer& grad_out) const;

    void save(const std::string& path) const;
    static SdfField load(const std::string& path);
    void save(std::ostream& os) const;
    static SdfField load(std::istream& is);

    // Flat-layout views over `params`/`grads`.
    struct MlpView {
        Eigen::Map<MatX> W0, W1, W2;
        Eigen::Map<VecX> b0, b1, b2;
    };
    MlpView sdf_head(AlignedBuffer& buf) const;
    MlpView color_head(AlignedBuffer& buf) const;

    struct BatchEval {
        int n = 0;
        bool has_color = false;
        Vec3 dir = Vec3::Zero();
        // outputs
        VecX sdf;
        Mat3X grad;
        Mat3X color;
        // encode context: per point, per active level, 8 corners
        std::vector<uint32_t> corner;   // global grid entry index (per feature block)
        std::vector<double> weight;     // trilinear weight
        std::vector<double> dweight;    // d weight / d x, 3 per corner
        int ctx_levels = 0;
        // Dual activations, fused column layout: cols [0,n) hold the value
        // channel, cols [(a+1)n,(a+2)n) the tangent channel for axis a. One
        // GEMM per layer covers all four channels.
        MatX X0;           // input (position + encoding) and its tangents
        MatX Z0, Z1;       // pre-activations (bias added to value cols only)
        MatX A0, A1;       // post-activations
        MatX Y;            // head output, (1 + geo_feature_dim) x 4n
        MatX sig0, sig1;   // softplus derivatives (value cols), for backward
        // color head (value-only)
        MatX cx, cz0, ca0, cz1, ca1, cpre;
    };

private:
    SdfFieldConfig cfg_;
    size_t grid_size_ = 0, mlp_size_ = 0;
    std::vector<uint32_t> level_offset_;   // feature-block offset per level
    std::vector<uint32_t> level_entries_;  // entry count per level
    std::vector<uint8_t> level_dense_;

    double cell_size(int level, int axis) const;
    uint32_t entry_index(int level, int ix, int iy, int iz) const;

    struct Dims {
        int in0, h, out;  // per-head matrix dims
    };
    Dims sdf_dims() const;
    Dims color_dims() const;
    size_t head_size(const Dims& d) const;

    void encode_point(const Vec3& x, int point_idx, BatchEval& ctx) const;
    double sphere_prior_value(const Vec3& x, Vec3* grad) const;
};

}  // namespace gsdf
