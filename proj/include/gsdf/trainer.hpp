#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsdf/config.hpp"
#include "gsdf/gaussians.hpp"
#include "gsdf/scene.hpp"
#include "gsdf/sdf_field.hpp"

namespace gsdf {

struct StepReport {
    long iteration = 0;
    int phase = 0;  // 1 gs warm-up, 2 sdf warm-up, 3 joint
    TotalLosses losses;
    double l1_gs = 0, ssim_loss = 0, l_vol = 0;
    double l1_sdf = 0, l_eik = 0, l_curv = 0, lambda_curv = 0;
    double depth_term = 0, normal_term = 0;
    int gaussians = 0;
    int active_levels = 0;
    DensityControlResult density;  // empty unless a control event ran
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepReport& r);

/// Deterministic full-view render of either branch, background composited
/// to white.
struct BranchRender {
    ImageBuffer color, depth, normal, alpha;
};
BranchRender render_gs_branch(const GaussianSet& set, const Camera& camera);
BranchRender render_sdf_branch(const SdfField& field, const Camera& camera,
                               const SamplerConfig& sampler, int sample_count,
                               uint64_t seed = 7);

/// Reads the model state out of a checkpoint without validating it against
/// a config (for render/eval/mesh tooling).
struct CheckpointContents {
    long iteration = 0;
    SdfField field;
    GaussianSet gaussians;
};
CheckpointContents peek_checkpoint(const std::string& path);

struct AblationVariant {
    std::string name;
    TrainConfig config;
};
/// The full method plus the three single-switch ablations.
std::vector<AblationVariant> ablation_switches(const TrainConfig& base);

class Trainer {
 public:
    Trainer(Dataset dataset, const TrainConfig& cfg);

    const TrainConfig& config() const { return cfg_; }
    long iteration() const { return iter_; }
    long total_iters() const { return cfg_.total_iters(); }
    int phase_of(long iter) const;

    StepReport step();

    /// Runs the remaining schedule, appending metrics.csv and events.txt in
    /// run_dir and writing periodic checkpoints. Empty run_dir keeps
    /// everything in memory.
    void run(const std::string& run_dir);

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    SdfField field;
    GaussianSet gaussians;
    const Dataset& dataset() const { return ds_; }

 private:
    void init_gaussians();
    StepReport step_gs_warmup();
    StepReport step_sdf(bool joint);

    Dataset ds_;
    TrainConfig cfg_;
    FieldOptimizer fopt_;
    GaussianOptimizer gopt_;
    GaussianGrads ggrads_;
    std::mt19937_64 rng_;
    long iter_ = 0;
    double scene_extent_ = 1.0;
};

}  // namespace gsdf
