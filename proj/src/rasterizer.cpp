#include "gsdf/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsdf {

namespace {
constexpr double kMinContribution = 1e-12;

struct PixelHit {
    int splat;  // index into ctx.splats
    double a;   // effective opacity at this pixel
    double g;   // 2D gaussian value
    double T;   // transmittance before this hit
};

// Shared forward traversal of one pixel; returns accumulated alpha.
template <typename Fn>
double traverse_pixel(const RasterContext& ctx, int px, int py, Fn&& visit) {
    int tx = px / kTileSize, ty = py / kTileSize;
    const std::vector<int>& bin = ctx.tile_bins[size_t(ty) * ctx.tiles_x + tx];
    const double cxp = px + 0.5, cyp = py + 0.5;
    double T = 1.0, alpha = 0.0;
    for (int si : bin) {
        const Splat2D& s = ctx.splats[si];
        Vec2 d(cxp - s.mean2d.x(), cyp - s.mean2d.y());
        double e = -0.5 * d.dot(s.conic * d);
        if (e < -40.0) continue;
        double g = std::exp(e);
        double a = s.opacity * g;
        if (a < kMinContribution) continue;
        visit(si, a, g, T, d);
        alpha += T * a;
        T *= 1.0 - a;
        if (T < kTransmittanceCutoff) break;
    }
    return alpha;
}
}  // namespace

std::optional<Splat2D> project_gaussian(const GaussianPrimitive& g, const Camera& camera,
                                        int source_index) {
    DecodedGaussian dec = decode(g);
    Vec3 p = camera.to_camera(dec.mean);
    if (p.z() <= 1e-6) return std::nullopt;  // behind camera

    const double z = p.z();
    Mat23 J;
    J << camera.fx / z, 0, -camera.fx * p.x() / (z * z),
        0, camera.fy / z, -camera.fy * p.y() / (z * z);
    Mat3 Rwc = camera.rotation.transpose();
    Mat3 M = dec.rotation * dec.scale.asDiagonal();
    Mat3 sigma = M * M.transpose();
    Mat3 V = Rwc * sigma * Rwc.transpose();
    Mat2 cov2d = J * V * J.transpose() + kCovFloor * Mat2::Identity();

    Splat2D s;
    s.mean2d = Vec2(camera.fx * p.x() / z + camera.cx, camera.fy * p.y() / z + camera.cy);
    s.cov2d = cov2d;
    s.conic = cov2d.inverse();
    s.depth = z;
    s.opacity = dec.opacity;
    s.color = dec.color;
    s.p_cam = p;
    s.source_index = source_index;

    // 3-sigma extent from the larger eigenvalue
    double tr = 0.5 * cov2d.trace();
    double det = cov2d.determinant();
    double lam = tr + std::sqrt(std::max(tr * tr - det, 0.0));
    s.radius = 3.0 * std::sqrt(lam);
    if (s.mean2d.x() + s.radius < 0 || s.mean2d.x() - s.radius > camera.width ||
        s.mean2d.y() + s.radius < 0 || s.mean2d.y() - s.radius > camera.height)
        return std::nullopt;

    s.normal_axis = smallest_scale_axis(dec.scale);
    Vec3 n = dec.rotation.col(s.normal_axis);
    s.normal_sign = n.dot(camera.position() - dec.mean) < 0 ? -1.0 : 1.0;
    s.normal = s.normal_sign * n;
    return s;
}

RasterOutput rasterize(const GaussianSet& set, const Camera& camera, RasterContext* ctx_out) {
    validate(camera);
    RasterContext local;
    RasterContext& ctx = ctx_out ? *ctx_out : local;
    ctx.camera = camera;
    ctx.primitive_count = set.size();
    ctx.splats.clear();

    for (size_t i = 0; i < set.size(); ++i)
        if (auto s = project_gaussian(set.primitives[i], camera, int(i)))
            ctx.splats.push_back(*s);

    // front-to-back global order, stable tie-break by source index
    std::sort(ctx.splats.begin(), ctx.splats.end(), [](const Splat2D& a, const Splat2D& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source_index < b.source_index;
    });

    ctx.tiles_x = (camera.width + kTileSize - 1) / kTileSize;
    ctx.tiles_y = (camera.height + kTileSize - 1) / kTileSize;
    ctx.tile_bins.assign(size_t(ctx.tiles_x) * ctx.tiles_y, {});
    for (int si = 0; si < int(ctx.splats.size()); ++si) {
        const Splat2D& s = ctx.splats[si];
        int x0 = std::max(0, int((s.mean2d.x() - s.radius) / kTileSize));
        int x1 = std::min(ctx.tiles_x - 1, int((s.mean2d.x() + s.radius) / kTileSize));
        int y0 = std::max(0, int((s.mean2d.y() - s.radius) / kTileSize));
        int y1 = std::min(ctx.tiles_y - 1, int((s.mean2d.y() + s.radius) / kTileSize));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx)
                ctx.tile_bins[size_t(ty) * ctx.tiles_x + tx].push_back(si);
    }
    ctx.valid = true;

    RasterOutput out;
    out.color = ImageBuffer(camera.width, camera.height, 3);
    out.depth = ImageBuffer(camera.width, camera.height, 1);
    out.normal = ImageBuffer(camera.width, camera.height, 3);
    out.alpha = ImageBuffer(camera.width, camera.height, 1);
    out.per_primitive_opacity.assign(set.size(), 0.0);
    out.per_primitive_grad.assign(set.size(), 0.0);

    // fixed row-block partition keeps the stat reduction order independent
    // of the thread count
    const int n_blocks = 16;
    std::vector<std::vector<double>> w_sum(n_blocks);
    std::vector<std::vector<int>> touched(n_blocks);
    for (int b = 0; b < n_blocks; ++b) {
        w_sum[b].assign(ctx.splats.size(), 0.0);
        touched[b].assign(ctx.splats.size(), 0);
    }

#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < n_blocks; ++blk) {
        for (int py = blk; py < camera.height; py += n_blocks) {
            for (int px = 0; px < camera.width; ++px) {
                Vec3 color = Vec3::Zero(), nsum = Vec3::Zero();
                double depth = 0.0;
                double alpha = traverse_pixel(
                    ctx, px, py, [&](int si, double a, double, double T, const Vec2&) {
                        const Splat2D& s = ctx.splats[si];
                        double w = T * a;
                        color += w * s.color;
                        depth += w * s.depth;
                        nsum += w * s.normal;
                        w_sum[blk][si] += w;
                        touched[blk][si] += 1;
                    });
                for (int c = 0; c < 3; ++c) out.color.at(px, py, c) = color(c);
                out.depth.at(px, py) = depth;
                out.alpha.at(px, py) = alpha;
                double nl = nsum.norm();
                if (alpha > 0.5 && nl > 1e-12) nsum /= nl;
                for (int c = 0; c < 3; ++c) out.normal.at(px, py, c) = nsum(c);
            }
        }
    }
    for (size_t si = 0; si < ctx.splats.size(); ++si) {
        double ws = 0.0;
        long tc = 0;
        for (int b = 0; b < n_blocks; ++b) {
            ws += w_sum[b][si];
            tc += touched[b][si];
        }
        if (tc > 0)
            out.per_primitive_opacity[ctx.splats[si].source_index] = ws / double(tc);
    }
    return out;
}

void rasterize_backward(const RasterContext& ctx, const ImageBuffer& color_bar,
                        const ImageBuffer& depth_bar, const ImageBuffer& normal_bar,
                        const ImageBuffer& alpha_bar, const GaussianSet& set,
                        GaussianGrads& grads, std::vector<double>& per_primitive_grad) {
    if (!ctx.valid) throw std::invalid_argument("rasterize_backward: stale context");
    if (ctx.primitive_count != set.size())
        throw std::invalid_argument("rasterize_backward: set size changed since forward");
    const Camera& cam = ctx.camera;
    const size_t ns = ctx.splats.size();

    std::vector<Vec2> mean2d_bar(ns, Vec2::Zero());
    std::vector<Mat2> conic_bar(ns, Mat2::Zero());
    std::vector<double> depth_attr_bar(ns, 0.0), opacity_bar(ns, 0.0);
    std::vector<Vec3> color_attr_bar(ns, Vec3::Zero()), normal_attr_bar(ns, Vec3::Zero());

    auto px_bar = [&](const ImageBuffer& b, int x, int y, int c) -> double {
        return b.data.empty() ? 0.0 : b.at(x, y, c);
    };

    // fixed number of row blocks so the reduction order is independent of
    // the thread count
    const int n_blocks = 16;
    struct Accum {
        std::vector<Vec2> m2d;
        std::vector<Mat2> conic;
        std::vector<double> depth, opac;
        std::vector<Vec3> color, normal;
    };
    std::vector<Accum> partial(n_blocks);
    for (Accum& a : partial) {
        a.m2d.assign(ns, Vec2::Zero());
        a.conic.assign(ns, Mat2::Zero());
        a.depth.assign(ns, 0.0);
        a.opac.assign(ns, 0.0);
        a.color.assign(ns, Vec3::Zero());
        a.normal.assign(ns, Vec3::Zero());
    }

#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < n_blocks; ++blk) {
        Accum& acc = partial[blk];
        std::vector<PixelHit> hits;
        for (int py = blk; py < cam.height; py += n_blocks) {
            for (int px = 0; px < cam.width; ++px) {
                hits.clear();
                Vec3 nsum = Vec3::Zero();
                double alpha = traverse_pixel(
                    ctx, px, py, [&](int si, double a, double g, double T, const Vec2&) {
                        hits.push_back({si, a, g, T});
                        nsum += T * a * ctx.splats[si].normal;
                    });
                if (hits.empty()) continue;

                Vec3 cbar(px_bar(color_bar, px, py, 0), px_bar(color_bar, px, py, 1),
                          px_bar(color_bar, px, py, 2));
                double dbar = px_bar(depth_bar, px, py, 0);
                Vec3 nbar(px_bar(normal_bar, px, py, 0), px_bar(normal_bar, px, py, 1),
                          px_bar(normal_bar, px, py, 2));
                double abar = px_bar(alpha_bar, px, py, 0);

                Vec3 m_bar = nbar;
                double nl = nsum.norm();
                if (alpha > 0.5 && nl > 1e-12) {
                    Vec3 N = nsum / nl;
                    m_bar = (nbar - N * N.dot(nbar)) / nl;
                }

                double B = 0.0;
                const double cxp = px + 0.5, cyp = py + 0.5;
                for (int k = int(hits.size()) - 1; k >= 0; --k) {
                    const PixelHit& h = hits[k];
                    const Splat2D& s = ctx.splats[h.splat];
                    double w = h.T * h.a;
                    acc.color[h.splat] += w * cbar;
                    acc.normal[h.splat] += w * m_bar;
                    acc.depth[h.splat] += w * dbar;
                    double u = s.color.dot(cbar) + s.depth * dbar + s.normal.dot(m_bar) + abar;
                    double a_bar = h.T * (u - B);
                    B = h.a * u + (1.0 - h.a) * B;

                    acc.opac[h.splat] += h.g * a_bar;
                    double g_bar = s.opacity * a_bar;
                    double e_bar = h.g * g_bar;
                    Vec2 d(cxp - s.mean2d.x(), cyp - s.mean2d.y());
                    acc.m2d[h.splat] += e_bar * (s.conic * d);
                    acc.conic[h.splat] += -0.5 * e_bar * (d * d.transpose());
                }
            }
        }
    }

    for (const Accum& a : partial)
        for (size_t si = 0; si < ns; ++si) {
            mean2d_bar[si] += a.m2d[si];
            conic_bar[si] += a.conic[si];
            depth_attr_bar[si] += a.depth[si];
            opacity_bar[si] += a.opac[si];
            color_attr_bar[si] += a.color[si];
            normal_attr_bar[si] += a.normal[si];
        }

    if (grads.mean.size() != set.size()) grads.resize(set.size());
    per_primitive_grad.assign(set.size(), 0.0);
    Mat3 Rwc = cam.rotation.transpose();

    for (size_t si = 0; si < ns; ++si) {
        const Splat2D& s = ctx.splats[si];
        const GaussianPrimitive& g = set.primitives[s.source_index];
        DecodedGaussian dec = decode(g);
        const Vec3& p = s.p_cam;
        const double z = p.z();

        // conic -> cov2d
        Mat2 cov2d_bar = -s.conic * conic_bar[si] * s.conic;

        Mat23 J;
        J << cam.fx / z, 0, -cam.fx * p.x() / (z * z),
            0, cam.fy / z, -cam.fy * p.y() / (z * z);
        Mat3 M = dec.rotation * dec.scale.asDiagonal();
        Mat3 sigma = M * M.transpose();
        Mat3 V = Rwc * sigma * Rwc.transpose();

        Mat3 V_bar = J.transpose() * cov2d_bar * J;
        Mat23 J_bar = 2.0 * cov2d_bar * J * V;

        Vec3 p_bar = J.transpose() * mean2d_bar[si];
        p_bar.x() += J_bar(0, 2) * (-cam.fx / (z * z));
        p_bar.y() += J_bar(1, 2) * (-cam.fy / (z * z));
        p_bar.z() += J_bar(0, 0) * (-cam.fx / (z * z)) +
                     J_bar(0, 2) * (2.0 * cam.fx * p.x() / (z * z * z)) +
                     J_bar(1, 1) * (-cam.fy / (z * z)) +
                     J_bar(1, 2) * (2.0 * cam.fy * p.y() / (z * z * z));
        p_bar.z() += depth_attr_bar[si];

        Vec3 mean_bar = cam.rotation * p_bar;
        Mat3 sigma_bar = cam.rotation * V_bar * cam.rotation.transpose();
        Mat3 M_bar = 2.0 * sigma_bar * M;
        Mat3 R_bar = M_bar * dec.scale.asDiagonal();
        Vec3 ls_bar;
        for (int k = 0; k < 3; ++k) {
            double s_bar = dec.rotation.col(k).dot(M_bar.col(k));
            ls_bar(k) = g.log_scale(k) > kLogScaleFloor ? s_bar * dec.scale(k) : 0.0;
        }
        R_bar.col(s.normal_axis) += s.normal_sign * normal_attr_bar[si];

        grads.mean[s.source_index] += mean_bar;
        grads.log_scale[s.source_index] += ls_bar;
        grads.quat[s.source_index] += quat_rotation_backward(g.quat, R_bar);
        grads.opacity_logit[s.source_index] +=
            opacity_bar[si] * dec.opacity * (1.0 - dec.opacity);
        Vec3 cl_bar;
        for (int c = 0; c < 3; ++c)
            cl_bar(c) = color_attr_bar[si](c) * dec.color(c) * (1.0 - dec.color(c));
        grads.color_logit[s.source_index] += cl_bar;

        per_primitive_grad[s.source_index] = mean2d_bar[si].norm();
    }
}

}  // namespace gsdf
