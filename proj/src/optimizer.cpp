#include "gsdf/optimizer.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace gsdf {

namespace {

template <typename ParamsT, typename GradsT>
void adam_step_impl(ParamsT& params, const GradsT& grads, size_t begin, size_t count,
                    double lr, const AdamConfig& cfg, AdamState& state) {
    if (begin + count > params.size() || grads.size() != params.size())
        throw std::invalid_argument("adam_step: range out of bounds");
    if (state.m.size() != count) state.resize(count);
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (size_t i = 0; i < count; ++i) {
        double g = grads[begin + i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[begin + i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               size_t begin, size_t count, double lr, const AdamConfig& cfg,
               AdamState& state) {
    adam_step_impl(params, grads, begin, count, lr, cfg, state);
}

void adam_step(AlignedBuffer& params, const AlignedBuffer& grads, size_t begin,
               size_t count, double lr, const AdamConfig& cfg, AdamState& state) {
    adam_step_impl(params, grads, begin, count, lr, cfg, state);
}

void FieldOptimizer::init(const SdfField& field) {
    grid.resize(field.grid_param_count());
    grid.t = 0;
    mlp.resize(field.mlp_param_count());
    mlp.t = 0;
    sharpness.resize(1);
    sharpness.t = 0;
}

void FieldOptimizer::step(SdfField& field) {
    adam_step(field.params, field.grads, 0, field.grid_param_count(), lr_grid, cfg, grid);
    adam_step(field.params, field.grads, field.grid_param_count(),
              field.mlp_param_count(), lr_mlp, cfg, mlp);
    adam_step(field.params, field.grads, field.sharpness_index(), 1, lr_sharpness, cfg,
              sharpness);
}

namespace {

// scalar Adam update over a strided view of attribute data
template <typename Get>
void adam_attr(AdamState& state, size_t n, int stride, double lr, const AdamConfig& cfg,
               Get&& get) {
    if (state.m.size() != n * stride) {
        state.m.assign(n * stride, 0.0);
        state.v.assign(n * stride, 0.0);
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (size_t i = 0; i < n; ++i)
        for (int k = 0; k < stride; ++k) {
            auto [p, g] = get(i, k);
            size_t j = i * stride + k;
            state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
            state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
            *p -= lr * (state.m[j] / bc1) / (std::sqrt(state.v[j] / bc2) + cfg.eps);
        }
}

void remap_state(AdamState& state, int stride, const DensityControlResult& r) {
    size_t n_new = r.kept_indices.size() + r.child_parents.size();
    std::vector<double> m(n_new * stride, 0.0), v(n_new * stride, 0.0);
    for (size_t i = 0; i < r.kept_indices.size(); ++i)
        for (int k = 0; k < stride; ++k) {
            size_t src = size_t(r.kept_indices[i]) * stride + k;
            if (src < state.m.size()) {
                m[i * stride + k] = state.m[src];
                v[i * stride + k] = state.v[src];
            }
        }
    state.m = std::move(m);
    state.v = std::move(v);
}

}  // namespace

void GaussianOptimizer::init(const GaussianSet& set) {
    size_t n = set.size();
    mean.resize(3 * n);
    log_scale.resize(3 * n);
    quat.resize(4 * n);
    opacity.resize(n);
    color.resize(3 * n);
    mean.t = log_scale.t = quat.t = opacity.t = color.t = 0;
}

void GaussianOptimizer::step(GaussianSet& set, const GaussianGrads& grads) {
    size_t n = set.size();
    if (grads.mean.size() != n)
        throw std::invalid_argument("GaussianOptimizer::step: grad size mismatch");
    double lrm = lr_mean * extent * mean_lr_decay;
    adam_attr(mean, n, 3, lrm, cfg, [&](size_t i, int k) {
        return std::pair<double*, double>(&set.primitives[i].mean[k], grads.mean[i][k]);
    });
    adam_attr(log_scale, n, 3, lr_scale, cfg, [&](size_t i, int k) {
        return std::pair<double*, double>(&set.primitives[i].log_scale[k],
                                          grads.log_scale[i][k]);
    });
    adam_attr(quat, n, 4, lr_rotation, cfg, [&](size_t i, int k) {
        return std::pair<double*, double>(&set.primitives[i].quat[k], grads.quat[i][k]);
    });
    adam_attr(opacity, n, 1, lr_opacity, cfg, [&](size_t i, int) {
        return std::pair<double*, double>(&set.primitives[i].opacity_logit,
                                          grads.opacity_logit[i]);
    });
    adam_attr(color, n, 3, lr_color, cfg, [&](size_t i, int k) {
        return std::pair<double*, double>(&set.primitives[i].color_logit[k],
                                          grads.color_logit[i][k]);
    });
}

void GaussianOptimizer::remap(const DensityControlResult& result) {
    remap_state(mean, 3, result);
    remap_state(log_scale, 3, result);
    remap_state(quat, 4, result);
    remap_state(opacity, 1, result);
    remap_state(color, 3, result);
}

void save_adam_state(std::ostream& os, const AdamState& s) {
    uint64_t n = s.m.size();
    int64_t t = s.t;
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    os.write(reinterpret_cast<const char*>(&t), sizeof(t));
    os.write(reinterpret_cast<const char*>(s.m.data()), n * sizeof(double));
    os.write(reinterpret_cast<const char*>(s.v.data()), n * sizeof(double));
}

void load_adam_state(std::istream& is, AdamState& s) {
    uint64_t n = 0;
    int64_t t = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    is.read(reinterpret_cast<char*>(&t), sizeof(t));
    s.m.resize(n);
    s.v.resize(n);
    is.read(reinterpret_cast<char*>(s.m.data()), n * sizeof(double));
    is.read(reinterpret_cast<char*>(s.v.data()), n * sizeof(double));
    s.t = t;
    if (!is) throw std::runtime_error("load_adam_state: truncated stream");
}

void FieldOptimizer::save(std::ostream& os) const {
    save_adam_state(os, grid);
    save_adam_state(os, mlp);
    save_adam_state(os, sharpness);
}

void FieldOptimizer::load(std::istream& is) {
    load_adam_state(is, grid);
    load_adam_state(is, mlp);
    load_adam_state(is, sharpness);
}

void GaussianOptimizer::save(std::ostream& os) const {
    save_adam_state(os, mean);
    save_adam_state(os, log_scale);
    save_adam_state(os, quat);
    save_adam_state(os, opacity);
    save_adam_state(os, color);
}

void GaussianOptimizer::load(std::istream& is) {
    load_adam_state(is, mean);
    load_adam_state(is, log_scale);
    load_adam_state(is, quat);
    load_adam_state(is, opacity);
    load_adam_state(is, color);
}

}  // namespace gsdf
