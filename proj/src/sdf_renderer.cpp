#include "gsdf/sdf_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsdf {

namespace {
constexpr double kRangeFloor = 1e-3;  // window half-width when |s| ~ 0
constexpr double kPhiFloor = 1e-7;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void finalize(RaySampleSet& s) {
    std::sort(s.t.begin(), s.t.end());
    // dedupe: drop samples closer than 1e-9
    std::vector<double> out;
    out.reserve(s.t.size());
    for (double v : s.t)
        if (out.empty() || v - out.back() > 1e-9) out.push_back(v);
    s.t = std::move(out);
    s.delta.clear();
    for (size_t j = 0; j + 1 < s.t.size(); ++j) s.delta.push_back(s.t[j + 1] - s.t[j]);
}
}  // namespace

RaySampleSet sample_ray_stratified(const Ray& ray, const SamplerConfig& cfg,
                                   int sample_count, std::mt19937_64& rng) {
    if (sample_count < 2)
        throw std::invalid_argument("sample_ray_stratified: need at least 2 samples");
    if (!(cfg.near < cfg.far))
        throw std::invalid_argument("sample_ray_stratified: near must be < far");
    RaySampleSet s;
    s.ray = ray;
    s.provenance = SampleProvenance::Stratified;
    const double bin = (cfg.far - cfg.near) / sample_count;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int j = 0; j < sample_count; ++j)
        s.t.push_back(cfg.near + (j + uni(rng)) * bin);
    finalize(s);
    return s;
}

RaySampleSet sample_ray_guided(const Ray& ray, double gs_depth, const SdfField& field,
                               const SamplerConfig& cfg, std::mt19937_64& rng) {
    if (!std::isfinite(gs_depth) || gs_depth <= 0)
        return sample_ray_stratified(ray, cfg, 2 * cfg.samples_per_range, rng);
    double s_abs = std::abs(field.sdf_value(ray.origin + gs_depth * ray.direction));
    RaySampleSet s;
    s.ray = ray;
    s.provenance = SampleProvenance::Guided;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto emit_window = [&](double k) {
        // on-surface queries (|s| ~ 0) collapse both windows to a fixed floor
        double half = s_abs < 1e-6 ? kRangeFloor : k * s_abs;
        double lo = gs_depth - half;
        double hi = gs_depth + half;
        double bin = (hi - lo) / cfg.samples_per_range;
        for (int j = 0; j < cfg.samples_per_range; ++j) {
            double t = lo + (j + uni(rng)) * bin;
            t = std::clamp(t, 1e-6, cfg.far);
            s.t.push_back(t);
        }
    };
    emit_window(cfg.k_coarse);
    emit_window(cfg.k_fine);
    finalize(s);
    return s;
}

double neus_alpha(double f_i, double f_next, double sharpness) {
    if (sharpness <= 0) throw std::invalid_argument("neus_alpha: sharpness must be > 0");
    double phi_i = sigmoid(sharpness * f_i);
    double phi_n = sigmoid(sharpness * f_next);
    double denom = std::max(phi_i, kPhiFloor);
    return std::max((phi_i - phi_n) / denom, 0.0);
}

VolumeRenderOutput volume_render(const RaySampleSet& samples, const SdfField& field,
                                 const Vec3& direction, VolumeRenderContext* ctx) {
    VolumeRenderOutput out;
    const int n = int(samples.t.size());
    if (n < 2) return out;  // empty output, valid=false

    std::vector<Vec3> xs(n);
    for (int i = 0; i < n; ++i)
        xs[i] = samples.ray.origin + samples.t[i] * samples.ray.direction;

    VolumeRenderContext local;
    VolumeRenderContext& c = ctx ? *ctx : local;
    field.eval(xs, &direction, c.eval);
    c.t = samples.t;

    const double sharp = field.sharpness();
    const int m = n - 1;
    c.alpha_i.assign(m, 0.0);
    c.T_i.assign(m, 0.0);
    out.weights.assign(m, 0.0);

    double T = 1.0;
    Vec3 color = Vec3::Zero(), nsum = Vec3::Zero();
    double depth = 0.0, alpha = 0.0;
    for (int i = 0; i < m; ++i) {
        double a = neus_alpha(c.eval.sdf(i), c.eval.sdf(i + 1), sharp);
        c.alpha_i[i] = a;
        c.T_i[i] = T;
        double w = T * a;
        out.weights[i] = w;
        color += w * c.eval.color.col(i);
        depth += w * samples.t[i];
        nsum += w * c.eval.grad.col(i);
        alpha += w;
        T *= 1.0 - a;
    }
    out.color = color;
    out.depth = depth;
    out.alpha = alpha;
    c.raw_normal = nsum;
    c.accum_alpha = alpha;
    double nl = nsum.norm();
    if (alpha > 0.5 && nl > 1e-12) {
        out.normal = nsum / nl;
        c.normalized = true;
    } else {
        out.normal = nsum;
        c.normalized = false;
    }
    out.valid = true;
    return out;
}

void volume_render_backward(const VolumeRenderContext& ctx, const SdfField& field,
                            const Vec3& color_bar, double depth_bar, const Vec3& normal_bar,
                            double alpha_bar, AlignedBuffer& grad_out,
                            const VecX* extra_sdf_bar, const Mat3X* extra_grad_bar) {
    const int n = int(ctx.t.size());
    if (n < 2) return;
    const int m = n - 1;
    const double sharp = field.sharpness();

    Vec3 m_bar = normal_bar;
    if (ctx.normalized) {
        double r = ctx.raw_normal.norm();
        Vec3 N = ctx.raw_normal / r;
        m_bar = (normal_bar - N * N.dot(normal_bar)) / r;
    }

    VecX sdf_bar = VecX::Zero(n);
    Mat3X grad_bar = Mat3X::Zero(3, n);
    Mat3X cbar = Mat3X::Zero(3, n);
    double logsharp_bar = 0.0;

    // payloads and direct attribute bars
    std::vector<double> u(m);
    for (int i = 0; i < m; ++i) {
        double w = ctx.T_i[i] * ctx.alpha_i[i];
        u[i] = ctx.eval.color.col(i).dot(color_bar) + ctx.t[i] * depth_bar +
               ctx.eval.grad.col(i).dot(m_bar) + alpha_bar;
        cbar.col(i) = w * color_bar;
        grad_bar.col(i) = w * m_bar;
    }

    // back-to-front transmittance-aware accumulation (no division by 1-alpha)
    double B = 0.0;
    for (int i = m - 1; i >= 0; --i) {
        double a_bar = ctx.T_i[i] * (u[i] - B);
        B = ctx.alpha_i[i] * u[i] + (1.0 - ctx.alpha_i[i]) * B;

        // alpha -> (f_i, f_{i+1}, log sharpness)
        double fi = ctx.eval.sdf(i), fn = ctx.eval.sdf(i + 1);
        double phi_i = sigmoid(sharp * fi), phi_n = sigmoid(sharp * fn);
        double denom = std::max(phi_i, 1e-7);
        if (phi_i - phi_n <= 0) continue;  // clamped at zero
        double da_dphi_i = phi_i > 1e-7 ? phi_n / (denom * denom) : 1.0 / denom;
        double da_dphi_n = -1.0 / denom;
        double dphi_i_df = sharp * phi_i * (1 - phi_i);
        double dphi_n_df = sharp * phi_n * (1 - phi_n);
        sdf_bar(i) += a_bar * da_dphi_i * dphi_i_df;
        sdf_bar(i + 1) += a_bar * da_dphi_n * dphi_n_df;
        logsharp_bar += a_bar * sharp *
                        (da_dphi_i * fi * phi_i * (1 - phi_i) +
                         da_dphi_n * fn * phi_n * (1 - phi_n));
    }

    if (extra_sdf_bar) sdf_bar += *extra_sdf_bar;
    if (extra_grad_bar) grad_bar += *extra_grad_bar;

    field.backward(ctx.eval, sdf_bar, grad_bar, cbar, grad_out);
    grad_out[field.sharpness_index()] += logsharp_bar;
}

}  // namespace gsdf
