#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gsdf/density_control.hpp"
#include "gsdf/losses.hpp"
#include "gsdf/optimizer.hpp"
#include "gsdf/sdf_field.hpp"
#include "gsdf/sdf_renderer.hpp"

namespace gsdf {

struct TrainConfig {
    // schedule
    long gs_warmup_iters = 1500;
    long sdf_warmup_iters = 500;
    long joint_iters = 3000;
    int rays_per_step = 512;
    int views_per_step = 1;
    long checkpoint_every = 1000;
    uint64_t seed = 1;
    int threads = 0;  // 0 = hardware default

    // gaussian initialization
    int init_gaussians = 4000;
    std::string init_mode = "surface";  // "surface" | "random"
    double init_scale = 0.04;
    double init_jitter = 0.01;

    // learning rates
    double lr_grid = 1e-2;
    double lr_mlp = 1e-3;
    double lr_sharpness = 1e-3;
    double lr_mean = 1.6e-4;  // x scene extent, exponentially decayed
    double lr_mean_final = 0.01;
    double lr_scale = 2.5e-3;
    double lr_rotation = 5e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    AdamConfig adam;

    // ablation switches
    bool guided_sampling = true;
    bool geometry_density_control = true;
    bool mutual_supervision = true;

    // sdf branch details
    int sdf_warmup_samples = 64;  // stratified count during warm-up
    double curvature_epsilon = 0.01;
    int curvature_points = 128;  // surface points per step for the curvature term

    SdfFieldConfig field;
    SamplerConfig sampler;
    LossWeights weights;
    DensityControlConfig density;
    ProgressiveSchedule progressive;

    long total_iters() const { return gs_warmup_iters + sdf_warmup_iters + joint_iters; }
};

/// Small-scene preset: short schedule, compact hash grid.
TrainConfig desk_config();
/// Full-size preset matching the published schedule; documentation value,
/// not exercised by the test suite.
TrainConfig paper_config();

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string to_json_string(const TrainConfig& cfg);
/// Throws ConfigError listing every unknown key.
TrainConfig config_from_json_string(const std::string& text);

void save_config(const std::string& path, const TrainConfig& cfg);
TrainConfig load_config(const std::string& path);  // ConfigError on missing file

/// FNV-1a of the canonical JSON serialization; stored in checkpoints.
uint64_t config_hash(const TrainConfig& cfg);

struct RunManifest {
    std::string command;
    std::string config_path;
    std::string run_dir;
    std::string version;
    uint64_t seed = 0;
    std::string timestamp;
};

void write_manifest(const std::string& run_dir, const RunManifest& m);

}  // namespace gsdf
