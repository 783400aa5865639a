#pragma once

#include <iosfwd>
#include <vector>

#include "gsdf/density_control.hpp"
#include "gsdf/gaussians.hpp"
#include "gsdf/sdf_field.hpp"

namespace gsdf {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam moments for one flat parameter block.
struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    void resize(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

/// One Adam update over params[begin, begin+count). Bias-corrected; `t`
/// advances once per call.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               size_t begin, size_t count, double lr, const AdamConfig& cfg,
               AdamState& state);
void adam_step(AlignedBuffer& params, const AlignedBuffer& grads, size_t begin,
               size_t count, double lr, const AdamConfig& cfg, AdamState& state);

/// Adam over an SdfField with separate learning rates for the hash grid, the
/// MLP heads, and the sharpness scalar.
struct FieldOptimizer {
    AdamConfig cfg;
    double lr_grid = 1e-2;
    double lr_mlp = 1e-3;
    double lr_sharpness = 1e-3;
    AdamState grid, mlp, sharpness;

    void init(const SdfField& field);
    void step(SdfField& field);

    void save(std::ostream& os) const;
    void load(std::istream& is);
};

/// Adam over the Gaussian attribute groups. Moments are kept per primitive
/// and remapped across density-control events (children start with zero
/// moments).
struct GaussianOptimizer {
    AdamConfig cfg;
    double lr_mean = 1.6e-4;  // multiplied by `extent`, decayed externally
    double lr_scale = 2.5e-3;
    double lr_rotation = 5e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    double extent = 1.0;       // scene extent scaling for the mean lr
    double mean_lr_decay = 1.0;  // set per step by the schedule

    AdamState mean, log_scale, quat, opacity, color;

    void init(const GaussianSet& set);
    void step(GaussianSet& set, const GaussianGrads& grads);
    void remap(const DensityControlResult& result);

    void save(std::ostream& os) const;
    void load(std::istream& is);
};

void save_adam_state(std::ostream& os, const AdamState& s);
void load_adam_state(std::istream& is, AdamState& s);

}  // namespace gsdf
