#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gsdf/optimizer.hpp"
#include "gsdf/sdf_field.hpp"

namespace gsdf::testing {

inline SdfFieldConfig small_field_config() {
    SdfFieldConfig cfg;
    cfg.grid.levels = 4;
    cfg.grid.base_resolution = 4;
    cfg.grid.max_resolution = 16;
    cfg.grid.feature_dim = 2;
    cfg.grid.table_size = 1u << 12;
    cfg.hidden_width = 16;
    cfg.geo_feature_dim = 7;
    return cfg;
}

/// Direct regression of the field onto a target SDF (the oracle fit used to
/// validate renderer and loss behavior against analytic geometry).
inline SdfField fit_field(const std::function<double(const Vec3&)>& target, int iters,
                          uint64_t seed = 11, SdfFieldConfig cfg = SdfFieldConfig{}) {
    if (cfg.grid.levels == 16 && cfg.grid.max_resolution == 2048) {
        cfg.grid.levels = 6;
        cfg.grid.base_resolution = 8;
        cfg.grid.max_resolution = 64;
        cfg.grid.feature_dim = 2;
        cfg.grid.table_size = 1u << 14;
        cfg.hidden_width = 32;
    }
    SdfField field(cfg, seed);
    field.active_levels = cfg.grid.levels;
    FieldOptimizer opt;
    opt.lr_grid = 1e-2;
    opt.lr_mlp = 1e-3;
    opt.init(field);
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int batch = 512;
    for (int it = 0; it < iters; ++it) {
        std::vector<Vec3> xs(batch);
        VecX targets(batch);
        for (int i = 0; i < batch; ++i) {
            for (int a = 0; a < 3; ++a)
                xs[i][a] = cfg.domain_min[a] +
                           uni(rng) * (cfg.domain_max[a] - cfg.domain_min[a]);
            targets(i) = target(xs[i]);
        }
        SdfField::BatchEval ev;
        field.eval(xs, nullptr, ev);
        field.zero_grad();
        VecX sdf_bar = 2.0 * (ev.sdf - targets) / double(batch);
        field.backward(ev, sdf_bar, Mat3X(), Mat3X(), field.grads);
        opt.step(field);
    }
    return field;
}

inline SdfField& sphere_fit_field() {
    static SdfField field = fit_field(
        [](const Vec3& x) { return x.norm() - 0.5; }, 1500, 11);
    return field;
}

/// Relative error with an absolute floor for near-zero references.
inline double rel_err(double got, double want, double floor_ = 1e-8) {
    return std::abs(got - want) / std::max(std::abs(want), floor_);
}

}  // namespace gsdf::testing
