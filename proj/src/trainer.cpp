#include "gsdf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gsdf/rasterizer.hpp"
#include "gsdf/sdf_renderer.hpp"

namespace gsdf {

namespace {

constexpr int kRayBlocks = 8;  // fixed partitioning keeps reductions ordered
constexpr double kBackground = 1.0;  // white

void composite_white(ImageBuffer& color, const ImageBuffer& alpha) {
    for (int y = 0; y < color.height; ++y)
        for (int x = 0; x < color.width; ++x) {
            double a = alpha.at(x, y);
            for (int c = 0; c < 3; ++c)
                color.at(x, y, c) += (1.0 - a) * kBackground;
        }
}

// Camera-space z component of the unit ray direction through a pixel:
// converts between camera-z depth (GS branch) and ray distance (SDF branch),
// z = t * factor.
double ray_z_factor(const Camera& cam, int px, int py) {
    Ray ray = ray_for_pixel(cam, px, py);
    return ray.direction.dot(cam.rotation.col(2));
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9e", v);
    return buf;
}

}  // namespace

std::string metrics_csv_header() {
    return "iteration,phase,total,l_g,l_s,l_mutual,l1_gs,ssim_loss,l_vol,l1_sdf,"
           "l_eik,l_curv,lambda_curv,depth_term,normal_term,gaussians,active_levels\n";
}

std::string metrics_csv_row(const StepReport& r) {
    std::string s = std::to_string(r.iteration) + "," + std::to_string(r.phase);
    for (double v :
         {r.losses.total, r.losses.l_g, r.losses.l_s, r.losses.l_mutual, r.l1_gs,
          r.ssim_loss, r.l_vol, r.l1_sdf, r.l_eik, r.l_curv, r.lambda_curv,
          r.depth_term, r.normal_term})
        s += "," + fmt(v);
    s += "," + std::to_string(r.gaussians) + "," + std::to_string(r.active_levels) + "\n";
    return s;
}

BranchRender render_gs_branch(const GaussianSet& set, const Camera& camera) {
    RasterOutput out = rasterize(set, camera);
    BranchRender br;
    br.depth = std::move(out.depth);
    br.normal = std::move(out.normal);
    br.alpha = std::move(out.alpha);
    br.color = std::move(out.color);
    composite_white(br.color, br.alpha);
    return br;
}

BranchRender render_sdf_branch(const SdfField& field, const Camera& camera,
                               const SamplerConfig& sampler, int sample_count,
                               uint64_t seed) {
    BranchRender br;
    br.color = ImageBuffer(camera.width, camera.height, 3, kBackground);
    br.depth = ImageBuffer(camera.width, camera.height, 1, 0.0);
    br.normal = ImageBuffer(camera.width, camera.height, 3, 0.0);
    br.alpha = ImageBuffer(camera.width, camera.height, 1, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
    for (int py = 0; py < camera.height; ++py) {
        for (int px = 0; px < camera.width; ++px) {
            std::mt19937_64 rng(seed ^ (uint64_t(py) * camera.width + px) * 0x9E3779B97F4A7C15ull);
            Ray ray = ray_for_pixel(camera, px, py);
            RaySampleSet ss = sample_ray_stratified(ray, sampler, sample_count, rng);
            VolumeRenderOutput out = volume_render(ss, field, ray.direction);
            if (!out.valid) continue;
            for (int c = 0; c < 3; ++c)
                br.color.at(px, py, c) =
                    out.color[c] + (1.0 - out.alpha) * kBackground;
            br.depth.at(px, py) = out.depth * ray_z_factor(camera, px, py);
            for (int c = 0; c < 3; ++c) br.normal.at(px, py, c) = out.normal[c];
            br.alpha.at(px, py) = out.alpha;
        }
    }
    return br;
}

std::vector<AblationVariant> ablation_switches(const TrainConfig& base) {
    std::vector<AblationVariant> v;
    v.push_back({"full", base});
    TrainConfig a = base;
    a.guided_sampling = false;
    v.push_back({"no-guided-sampling", a});
    TrainConfig b = base;
    b.geometry_density_control = false;
    v.push_back({"no-density-control", b});
    TrainConfig c = base;
    c.mutual_supervision = false;
    v.push_back({"no-mutual-supervision", c});
    return v;
}

Trainer::Trainer(Dataset dataset, const TrainConfig& cfg) : ds_(std::move(dataset)), cfg_(cfg) {
    if (ds_.train.size() < 2)
        throw std::invalid_argument("Trainer: dataset needs at least 2 training views");
#ifdef _OPENMP
    if (cfg_.threads > 0) omp_set_num_threads(cfg_.threads);
#endif
    if (!cfg_.mutual_supervision) {
        cfg_.weights.lambda_d = 0.0;
        cfg_.weights.lambda_n = 0.0;
    }
    if (!cfg_.geometry_density_control) {
        cfg_.density.omega_g = 0.0;
        cfg_.density.omega_p = 0.0;
    }
    scene_extent_ =
        0.5 * (cfg_.field.domain_max - cfg_.field.domain_min).maxCoeff();

    rng_.seed(cfg_.seed);
    field = SdfField(cfg_.field, rng_());
    field.active_levels =
        activate_levels(cfg_.progressive, cfg_.field.grid.levels, 0);
    init_gaussians();

    fopt_.cfg = cfg_.adam;
    fopt_.lr_grid = cfg_.lr_grid;
    fopt_.lr_mlp = cfg_.lr_mlp;
    fopt_.lr_sharpness = cfg_.lr_sharpness;
    fopt_.init(field);

    gopt_.cfg = cfg_.adam;
    gopt_.lr_mean = cfg_.lr_mean;
    gopt_.lr_scale = cfg_.lr_scale;
    gopt_.lr_rotation = cfg_.lr_rotation;
    gopt_.lr_opacity = cfg_.lr_opacity;
    gopt_.lr_color = cfg_.lr_color;
    gopt_.extent = scene_extent_;
    gopt_.init(gaussians);
    ggrads_.resize(gaussians.size());
}

void Trainer::init_gaussians() {
    if (cfg_.init_mode == "random") {
        gaussians = init_random_in_box(cfg_.init_gaussians, cfg_.field.domain_min,
                                       cfg_.field.domain_max, cfg_.init_scale, rng_);
        return;
    }
    // surface mode: back-project masked depth pixels from the training views
    std::vector<Vec3> points, colors;
    std::uniform_int_distribution<int> pick_view(0, int(ds_.train.size()) - 1);
    long guard = 0;
    while (int(points.size()) < cfg_.init_gaussians && guard++ < 200L * cfg_.init_gaussians) {
        const SceneView& v = ds_.train[pick_view(rng_)];
        std::uniform_int_distribution<int> px(0, v.camera.width - 1);
        std::uniform_int_distribution<int> py(0, v.camera.height - 1);
        int x = px(rng_), y = py(rng_);
        if (v.mask.at(x, y) < 0.5) continue;
        double z = v.depth.at(x, y);
        if (z <= 0) continue;
        Vec3 x_cam((x + 0.5 - v.camera.cx) / v.camera.fx * z,
                   (y + 0.5 - v.camera.cy) / v.camera.fy * z, z);
        points.push_back(v.camera.to_world(x_cam));
        colors.push_back(Vec3(v.color.at(x, y, 0), v.color.at(x, y, 1), v.color.at(x, y, 2)));
    }
    if (points.empty())
        throw std::runtime_error("Trainer: surface init found no foreground pixels");
    gaussians = init_from_points(points, colors, cfg_.init_jitter, cfg_.init_scale, rng_);
}

int Trainer::phase_of(long iter) const {
    if (iter < cfg_.gs_warmup_iters) return 1;
    if (iter < cfg_.gs_warmup_iters + cfg_.sdf_warmup_iters) return 2;
    return 3;
}

StepReport Trainer::step() {
    if (iter_ >= total_iters()) throw std::logic_error("Trainer::step: schedule finished");
    int phase = phase_of(iter_);
    long sdf_iter = std::max(0L, iter_ - cfg_.gs_warmup_iters);
    field.active_levels =
        activate_levels(cfg_.progressive, cfg_.field.grid.levels, sdf_iter);

    StepReport r = (phase == 1) ? step_gs_warmup() : step_sdf(phase == 3);
    r.iteration = iter_;
    r.phase = phase;
    r.gaussians = int(gaussians.size());
    r.active_levels = field.active_levels;

    if (!std::isfinite(r.losses.total)) {
        std::ostringstream msg;
        msg << "Trainer: non-finite loss at iteration " << iter_ << " (phase " << phase
            << "): total=" << r.losses.total << " l_g=" << r.losses.l_g
            << " l_s=" << r.losses.l_s << " l_mutual=" << r.losses.l_mutual
            << " l1_gs=" << r.l1_gs << " ssim=" << r.ssim_loss << " l1_sdf=" << r.l1_sdf
            << " eik=" << r.l_eik << " curv=" << r.l_curv;
        throw std::runtime_error(msg.str());
    }
    iter_ += 1;
    return r;
}

StepReport Trainer::step_gs_warmup() {
    StepReport r;
    const SceneView& view = ds_.train[iter_ % ds_.train.size()];

    RasterContext rctx;
    RasterOutput rout = rasterize(gaussians, view.camera, &rctx);
    ImageBuffer comp = rout.color;
    composite_white(comp, rout.alpha);

    r.l1_gs = l1_loss(comp, view.color);
    double ssim_v = ssim(comp, view.color);
    r.ssim_loss = 1.0 - ssim_v;
    r.l_vol = volume_regularization(gaussians);
    r.losses = total_losses(r.l1_gs, r.ssim_loss, r.l_vol, 0, 0, 0, 0, 0, cfg_.weights);

    const double wl1 = cfg_.weights.swap_l1_ssim ? 1.0 - cfg_.weights.lambda1
                                                 : cfg_.weights.lambda1;
    const double wss = 1.0 - wl1;
    ImageBuffer color_bar(comp.width, comp.height, 3, 0.0);
    l1_loss_backward(comp, view.color, wl1, color_bar);
    ssim_backward(comp, view.color, -wss, color_bar);
    ImageBuffer alpha_bar(comp.width, comp.height, 1, 0.0);
    for (int y = 0; y < comp.height; ++y)
        for (int x = 0; x < comp.width; ++x)
            for (int c = 0; c < 3; ++c)
                alpha_bar.at(x, y) -= kBackground * color_bar.at(x, y, c);

    ggrads_.resize(gaussians.size());
    ggrads_.zero();
    ImageBuffer empty;
    rasterize_backward(rctx, color_bar, empty, empty, alpha_bar, gaussians, ggrads_,
                       rout.per_primitive_grad);
    volume_regularization_backward(gaussians, cfg_.weights.lambda_vol, ggrads_);

    long gs_iters_done = iter_;
    long gs_iters_total = cfg_.gs_warmup_iters + cfg_.joint_iters;
    gopt_.mean_lr_decay =
        std::pow(cfg_.lr_mean_final, double(gs_iters_done) / double(gs_iters_total));
    gopt_.step(gaussians, ggrads_);
    return r;
}

StepReport Trainer::step_sdf(bool joint) {
    StepReport r;
    const SceneView& view = ds_.train[iter_ % ds_.train.size()];
    const Camera& cam = view.camera;
    long sdf_iter = iter_ - cfg_.gs_warmup_iters;
    r.lambda_curv = cfg_.weights.lambda_curv_at(sdf_iter);

    // ---- GS branch forward (joint phase only) ----
    RasterContext rctx;
    RasterOutput rout;
    ImageBuffer comp;
    if (joint) {
        rout = rasterize(gaussians, cam, &rctx);
        comp = rout.color;
        composite_white(comp, rout.alpha);
        r.l1_gs = l1_loss(comp, view.color);
        r.ssim_loss = 1.0 - ssim(comp, view.color);
        r.l_vol = volume_regularization(gaussians);
    }

    // ---- SDF branch forward on a ray batch ----
    const int R = cfg_.rays_per_step;
    std::vector<int> pxs(R), pys(R);
    std::vector<uint64_t> seeds(R);
    std::uniform_int_distribution<int> ux(0, cam.width - 1), uy(0, cam.height - 1);
    for (int i = 0; i < R; ++i) {
        pxs[i] = ux(rng_);
        pys[i] = uy(rng_);
        seeds[i] = rng_();
    }

    std::vector<RaySampleSet> sets(R);
    std::vector<VolumeRenderOutput> outs(R);
    // contexts are kept for the backward pass so the field forward runs once
    std::vector<VolumeRenderContext> ctxs(R);
    const int stratified_count = joint ? 2 * cfg_.sampler.samples_per_range
                                       : cfg_.sdf_warmup_samples;
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < R; ++i) {
        std::mt19937_64 ray_rng(seeds[i]);
        Ray ray = ray_for_pixel(cam, pxs[i], pys[i]);
        if (joint && cfg_.guided_sampling) {
            double ga = rout.alpha.at(pxs[i], pys[i]);
            // GS depth is camera z; guided sampling wants ray distance.
            double depth = ga > 0.5 ? rout.depth.at(pxs[i], pys[i]) /
                                          ray_z_factor(cam, pxs[i], pys[i])
                                    : std::numeric_limits<double>::quiet_NaN();
            sets[i] = sample_ray_guided(ray, depth, field, cfg_.sampler, ray_rng);
        } else {
            sets[i] = sample_ray_stratified(ray, cfg_.sampler, stratified_count, ray_rng);
        }
        outs[i] = volume_render(sets[i], field, ray.direction, &ctxs[i]);
    }

    // photometric L1 of the SDF branch (white-composited)
    double l1_sum = 0.0;
    for (int i = 0; i < R; ++i) {
        for (int c = 0; c < 3; ++c) {
            double pred = outs[i].color[c] + (1.0 - outs[i].alpha) * kBackground;
            l1_sum += std::abs(pred - view.color.at(pxs[i], pys[i], c));
        }
    }
    r.l1_sdf = l1_sum / double(3 * R);

    long total_samples = 0;
    for (int i = 0; i < R; ++i) total_samples += long(sets[i].t.size());

    // ---- mutual supervision on the ray batch ----
    MutualLossResult mut;
    ImageBuffer dgs_bar, ds_bar, ngs_bar, ns_bar;
    if (joint) {
        ImageBuffer d_gs(R, 1, 1), d_s(R, 1, 1), n_gs(R, 1, 3), n_s(R, 1, 3),
            mask(R, 1, 1, 0.0);
        for (int i = 0; i < R; ++i) {
            d_gs.at(i, 0) = rout.depth.at(pxs[i], pys[i]);
            // SDF depth is ray distance; compare in camera-z units.
            d_s.at(i, 0) = outs[i].depth * ray_z_factor(cam, pxs[i], pys[i]);
            for (int c = 0; c < 3; ++c) {
                n_gs.at(i, 0, c) = rout.normal.at(pxs[i], pys[i], c);
                n_s.at(i, 0, c) = outs[i].normal[c];
            }
            if (rout.alpha.at(pxs[i], pys[i]) > 0.5 && outs[i].alpha > 0.5)
                mask.at(i, 0) = 1.0;
        }
        mut = mutual_loss(d_gs, d_s, n_gs, n_s, mask, cfg_.weights);
        r.depth_term = mut.depth_term;
        r.normal_term = mut.normal_term;
        dgs_bar = ImageBuffer(R, 1, 1, 0.0);
        ds_bar = ImageBuffer(R, 1, 1, 0.0);
        ngs_bar = ImageBuffer(R, 1, 3, 0.0);
        ns_bar = ImageBuffer(R, 1, 3, 0.0);
        mutual_loss_backward(d_gs, d_s, n_gs, n_s, mask, cfg_.weights, dgs_bar, ds_bar,
                             ngs_bar, ns_bar);
    }

    // ---- GS branch backward ----
    if (joint) {
        const double wl1 = cfg_.weights.swap_l1_ssim ? 1.0 - cfg_.weights.lambda1
                                                     : cfg_.weights.lambda1;
        const double wss = 1.0 - wl1;
        ImageBuffer color_bar(comp.width, comp.height, 3, 0.0);
        l1_loss_backward(comp, view.color, wl1, color_bar);
        ssim_backward(comp, view.color, -wss, color_bar);
        ImageBuffer alpha_bar(comp.width, comp.height, 1, 0.0);
        for (int y = 0; y < comp.height; ++y)
            for (int x = 0; x < comp.width; ++x)
                for (int c = 0; c < 3; ++c)
                    alpha_bar.at(x, y) -= kBackground * color_bar.at(x, y, c);
        ImageBuffer depth_bar(comp.width, comp.height, 1, 0.0);
        ImageBuffer normal_bar(comp.width, comp.height, 3, 0.0);
        for (int i = 0; i < R; ++i) {
            depth_bar.at(pxs[i], pys[i]) += dgs_bar.at(i, 0);
            for (int c = 0; c < 3; ++c)
                normal_bar.at(pxs[i], pys[i], c) += ngs_bar.at(i, 0, c);
        }

        ggrads_.resize(gaussians.size());
        ggrads_.zero();
        rasterize_backward(rctx, color_bar, depth_bar, normal_bar, alpha_bar, gaussians,
                           ggrads_, rout.per_primitive_grad);
        volume_regularization_backward(gaussians, cfg_.weights.lambda_vol, ggrads_);
        accumulate_stats(gaussians, rout.per_primitive_grad, rout.per_primitive_opacity);
    }

    // ---- SDF branch backward (per-ray recompute, block-ordered reduction) ----
    field.zero_grad();
    std::vector<AlignedBuffer> block_grads(kRayBlocks);
    std::vector<double> block_eik(kRayBlocks, 0.0);
    const double eik_w = cfg_.weights.lambda_eik;
#pragma omp parallel for schedule(static, 1)
    for (int b = 0; b < kRayBlocks; ++b) {
        block_grads[b].assign(field.param_count(), 0.0);
        int lo = int(size_t(b) * R / kRayBlocks);
        int hi = int(size_t(b + 1) * R / kRayBlocks);
        for (int i = lo; i < hi; ++i) {
            if (!outs[i].valid) continue;
            const VolumeRenderContext& ctx = ctxs[i];

            Vec3 cbar;
            double abar = 0.0;
            for (int c = 0; c < 3; ++c) {
                double pred = outs[i].color[c] + (1.0 - outs[i].alpha) * kBackground;
                double diff = pred - view.color.at(pxs[i], pys[i], c);
                double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                cbar[c] = s / double(3 * R);
                abar -= kBackground * cbar[c];
            }
            double dbar =
                joint ? ds_bar.at(i, 0) * ray_z_factor(cam, pxs[i], pys[i]) : 0.0;
            Vec3 nbar = Vec3::Zero();
            if (joint)
                for (int c = 0; c < 3; ++c) nbar[c] = ns_bar.at(i, 0, c);

            const int n = int(sets[i].t.size());
            Mat3X extra_grad = Mat3X::Zero(3, n);
            for (int k = 0; k < n; ++k) {
                Vec3 g = ctx.eval.grad.col(k);
                double nm = g.norm();
                block_eik[b] += (nm - 1.0) * (nm - 1.0);
                if (nm > 1e-12)
                    extra_grad.col(k) =
                        (eik_w * 2.0 * (nm - 1.0) / double(total_samples)) * (g / nm);
            }
            volume_render_backward(ctx, field, cbar, dbar, nbar, abar, block_grads[b],
                                   nullptr, &extra_grad);
        }
    }
    double eik_sum = 0.0;
    for (int b = 0; b < kRayBlocks; ++b) {
        eik_sum += block_eik[b];
        const AlignedBuffer& bg = block_grads[b];
        for (size_t k = 0; k < bg.size(); ++k) field.grads[k] += bg[k];
    }
    r.l_eik = total_samples > 0 ? eik_sum / double(total_samples) : 0.0;

    // curvature on approximate surface points (max-weight sample per ray)
    std::vector<Vec3> surf;
    for (int i = 0; i < R && int(surf.size()) < cfg_.curvature_points; ++i) {
        if (!outs[i].valid || outs[i].alpha <= 0.5) continue;
        int best = -1;
        double bw = 0.0;
        for (size_t k = 0; k < outs[i].weights.size(); ++k)
            if (outs[i].weights[k] > bw) {
                bw = outs[i].weights[k];
                best = int(k);
            }
        if (best < 0) continue;
        Ray ray = ray_for_pixel(cam, pxs[i], pys[i]);
        surf.push_back(ray.origin + sets[i].t[best] * ray.direction);
    }
    if (!surf.empty() && r.lambda_curv > 0.0) {
        CurvatureResult cr = curvature_loss(field, surf, cfg_.curvature_epsilon, rng_,
                                            r.lambda_curv, &field.grads);
        r.l_curv = cr.loss;
    }

    r.losses = total_losses(r.l1_gs, r.ssim_loss, r.l_vol, r.l1_sdf, r.l_eik, r.l_curv,
                            r.lambda_curv, mut.value, cfg_.weights);

    // ---- optimizer steps ----
    fopt_.step(field);
    if (joint) {
        long gs_iters_done = cfg_.gs_warmup_iters + (sdf_iter - cfg_.sdf_warmup_iters);
        long gs_iters_total = cfg_.gs_warmup_iters + cfg_.joint_iters;
        gopt_.mean_lr_decay =
            std::pow(cfg_.lr_mean_final, double(gs_iters_done) / double(gs_iters_total));
        gopt_.step(gaussians, ggrads_);

        long local = iter_ - cfg_.gs_warmup_iters - cfg_.sdf_warmup_iters;
        if ((local + 1) % cfg_.density.interval == 0) {
            // Trust the SDF in the control scores only as joint training
            // aligns the field with the splats; right after warm-up the field
            // still disagrees with every primitive and a full-strength
            // geometry term would prune the whole set. Early events ramp the
            // geometry weights from zero (the opacity/gradient-only rule).
            DensityControlConfig dcfg = cfg_.density;
            double ramp =
                std::min(1.0, double(local + 1) / (0.5 * double(cfg_.joint_iters)));
            dcfg.omega_g *= ramp;
            dcfg.omega_p *= ramp;
            r.density = apply_density_control(gaussians, field, dcfg, iter_, rng_);
            gopt_.remap(r.density);
            ggrads_.resize(gaussians.size());
        }
    }
    return r;
}

void Trainer::run(const std::string& run_dir) {
    std::ofstream metrics, events;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        bool fresh = !std::filesystem::exists(run_dir + "/metrics.csv");
        metrics.open(run_dir + "/metrics.csv", std::ios::app);
        if (fresh) metrics << metrics_csv_header();
        events.open(run_dir + "/events.txt", std::ios::app);
    }
    while (iter_ < total_iters()) {
        StepReport r = step();
        if (metrics.is_open()) metrics << metrics_csv_row(r);
        if (events.is_open())
            for (const DensityEvent& e : r.density.events)
                events << e.iteration << " " << e.index << " " << e.sdf << " " << e.eps_g
                       << " " << e.eps_p << " " << e.decision << "\n";
        if (!run_dir.empty() && cfg_.checkpoint_every > 0 &&
            iter_ % cfg_.checkpoint_every == 0 && iter_ < total_iters())
            save_checkpoint(run_dir + "/checkpoint_" + std::to_string(iter_) + ".bin");
    }
    if (!run_dir.empty()) save_checkpoint(run_dir + "/checkpoint_final.bin");
}

namespace {
constexpr char kCkptMagic[9] = "gsdfckp1";
}

void Trainer::save_checkpoint(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kCkptMagic, 8);
    uint64_t hash = config_hash(cfg_);
    int64_t it = iter_;
    os.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
    os.write(reinterpret_cast<const char*>(&it), sizeof(it));
    std::ostringstream rs;
    rs << rng_;
    std::string rng_text = rs.str();
    uint64_t rl = rng_text.size();
    os.write(reinterpret_cast<const char*>(&rl), sizeof(rl));
    os.write(rng_text.data(), rl);
    field.save(os);
    int32_t active = field.active_levels;
    os.write(reinterpret_cast<const char*>(&active), sizeof(active));
    save_gaussians(os, gaussians);
    uint64_t ns = gaussians.stats.size();
    os.write(reinterpret_cast<const char*>(&ns), sizeof(ns));
    for (const DensityStats& s : gaussians.stats) {
        os.write(reinterpret_cast<const char*>(&s.grad_accum), sizeof(double));
        os.write(reinterpret_cast<const char*>(&s.opacity_accum), sizeof(double));
        int32_t c = s.count;
        os.write(reinterpret_cast<const char*>(&c), sizeof(c));
    }
    fopt_.save(os);
    gopt_.save(os);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

CheckpointContents peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("peek_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != kCkptMagic)
        throw std::runtime_error("peek_checkpoint: bad magic in " + path);
    uint64_t hash = 0;
    int64_t it = 0;
    is.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    is.read(reinterpret_cast<char*>(&it), sizeof(it));
    uint64_t rl = 0;
    is.read(reinterpret_cast<char*>(&rl), sizeof(rl));
    is.seekg(std::streamoff(rl), std::ios::cur);
    CheckpointContents c;
    c.iteration = long(it);
    c.field = SdfField::load(is);
    int32_t active = 1;
    is.read(reinterpret_cast<char*>(&active), sizeof(active));
    c.field.active_levels = active;
    c.gaussians = load_gaussians(is);
    if (!is) throw std::runtime_error("peek_checkpoint: truncated file " + path);
    c.gaussians.resize_stats();
    return c;
}

void Trainer::load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != kCkptMagic)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    uint64_t hash = 0;
    int64_t it = 0;
    is.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    is.read(reinterpret_cast<char*>(&it), sizeof(it));
    if (hash != config_hash(cfg_))
        throw std::runtime_error("load_checkpoint: config mismatch for " + path);
    uint64_t rl = 0;
    is.read(reinterpret_cast<char*>(&rl), sizeof(rl));
    std::string rng_text(rl, '\0');
    is.read(rng_text.data(), rl);
    std::istringstream rs(rng_text);
    rs >> rng_;
    field = SdfField::load(is);
    int32_t active = 1;
    is.read(reinterpret_cast<char*>(&active), sizeof(active));
    field.active_levels = active;
    gaussians = load_gaussians(is);
    uint64_t ns = 0;
    is.read(reinterpret_cast<char*>(&ns), sizeof(ns));
    gaussians.stats.resize(ns);
    for (DensityStats& s : gaussians.stats) {
        is.read(reinterpret_cast<char*>(&s.grad_accum), sizeof(double));
        is.read(reinterpret_cast<char*>(&s.opacity_accum), sizeof(double));
        int32_t c = 0;
        is.read(reinterpret_cast<char*>(&c), sizeof(c));
        s.count = c;
    }
    fopt_.load(is);
    gopt_.load(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    iter_ = it;
    ggrads_.resize(gaussians.size());
}

}  // namespace gsdf
