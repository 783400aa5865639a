#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gsdf/config.hpp"
#include "gsdf/losses.hpp"
#include "gsdf/mesh.hpp"
#include "gsdf/metrics.hpp"
#include "gsdf/scene.hpp"
#include "gsdf/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace gsdf;

std::string timestamp_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

void emit_manifest(const std::string& command, const std::string& config_path,
                   const std::string& run_dir, uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.config_path = config_path;
    m.run_dir = run_dir;
    m.version = "gsdf 0.1";
    m.seed = seed;
    m.timestamp = timestamp_now();
    write_manifest(run_dir, m);
}

/// Loads a config file and applies `--set section.key=value` overrides on the
/// JSON representation before parsing, so overrides share the schema check.
TrainConfig load_config_with_overrides(const std::string& path,
                                       const std::vector<std::string>& overrides) {
    std::string text;
    if (path.empty()) {
        text = to_json_string(desk_config());
    } else {
        std::ifstream f(path);
        if (!f) throw ConfigError("config: cannot open " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    for (const std::string& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: override '" + ov + "' is not key=value");
        std::string keypath = ov.substr(0, eq);
        std::string value = ov.substr(eq + 1);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::parse_error&) {
            parsed = value;  // bare strings allowed
        }
        nlohmann::json* node = &j;
        size_t pos = 0;
        while (true) {
            auto dot = keypath.find('.', pos);
            std::string part = keypath.substr(pos, dot - pos);
            if (dot == std::string::npos) {
                (*node)[part] = parsed;
                break;
            }
            node = &(*node)[part];
            pos = dot + 1;
        }
    }
    return config_from_json_string(j.dump());
}

AnalyticScene scene_from_preset(const std::string& preset) {
    if (preset == "sphere") return make_sphere_scene();
    if (preset == "sphere-box") return make_sphere_box_scene();
    throw ConfigError("unknown scene preset '" + preset + "' (sphere, sphere-box)");
}

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

struct EvalRow {
    std::string branch;
    int view;
    double psnr_v, ssim_v;
};

void eval_branches(const SdfField& field, const GaussianSet& gaussians,
                   const std::vector<SceneView>& views, const SamplerConfig& sampler,
                   std::vector<EvalRow>& rows) {
    for (size_t i = 0; i < views.size(); ++i) {
        BranchRender gs = render_gs_branch(gaussians, views[i].camera);
        rows.push_back({"gs", int(i), std::min(psnr(gs.color, views[i].color), 99.0),
                        ssim(gs.color, views[i].color)});
        BranchRender sd = render_sdf_branch(field, views[i].camera, sampler, 128);
        rows.push_back({"sdf", int(i), std::min(psnr(sd.color, views[i].color), 99.0),
                        ssim(sd.color, views[i].color)});
    }
}

double chamfer_vs_scene(const SdfField& field, const AnalyticScene& scene,
                        int mc_resolution, uint64_t seed) {
    TriangleMesh mesh = marching_cubes(
        [&](const Vec3& x) { return field.sdf_value(x); }, field.config().domain_min,
        field.config().domain_max, mc_resolution);
    if (mesh.faces.empty()) return std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::vector<Vec3> pred = sample_mesh_surface(mesh, 100000, rng);
    std::vector<Vec3> gt = sample_scene_surface(scene, 100000, rng);
    return chamfer_distance(pred, gt);
}

int cmd_gen_scene(const std::string& preset, int views, int res, uint64_t seed,
                  const std::string& out) {
    AnalyticScene scene = scene_from_preset(preset);
    Dataset ds = make_dataset(scene, views, res, seed);
    save_dataset(out, ds);
    emit_manifest("gen-scene", "", out, seed);
    std::printf("gen-scene: %zu train / %zu test views at %dx%d -> %s\n",
                ds.train.size(), ds.test.size(), res, res, out.c_str());
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& config_path,
              const std::string& data, const std::string& run,
              const std::string& resume) {
    Dataset ds = load_dataset(data);
    Trainer trainer(std::move(ds), cfg);
    if (!resume.empty()) trainer.load_checkpoint(resume);
    emit_manifest("train", config_path, run, cfg.seed);
    save_config(run + "/config.json", cfg);
    trainer.run(run);
    std::printf("train: finished %ld iterations, %zu gaussians -> %s\n",
                trainer.iteration(), trainer.gaussians.size(), run.c_str());
    return 0;
}

int cmd_render(const TrainConfig& cfg, const std::string& checkpoint,
               const std::string& data, const std::string& branch,
               const std::string& out) {
    CheckpointContents ck = peek_checkpoint(checkpoint);
    Dataset ds = load_dataset(data);
    std::filesystem::create_directories(out);
    const std::vector<SceneView>& views = ds.test.empty() ? ds.train : ds.test;
    char buf[64];
    for (size_t i = 0; i < views.size(); ++i) {
        BranchRender br = branch == "gs"
                              ? render_gs_branch(ck.gaussians, views[i].camera)
                              : render_sdf_branch(ck.field, views[i].camera,
                                                  cfg.sampler, 128);
        std::snprintf(buf, sizeof(buf), "%s_%03zu", branch.c_str(), i);
        std::string stem = out + "/" + buf;
        write_ppm(stem + "_color.ppm", br.color);
        write_pfm(stem + "_depth.pfm", br.depth);
        write_pfm(stem + "_normal.pfm", br.normal);
    }
    std::printf("render: %zu %s-branch views -> %s\n", views.size(), branch.c_str(),
                out.c_str());
    return 0;
}

int cmd_extract_mesh(const std::string& checkpoint, int resolution,
                     const std::string& out) {
    CheckpointContents ck = peek_checkpoint(checkpoint);
    TriangleMesh mesh = marching_cubes(
        [&](const Vec3& x) { return ck.field.sdf_value(x); },
        ck.field.config().domain_min, ck.field.config().domain_max, resolution);
    if (out.size() > 4 && out.substr(out.size() - 4) == ".obj")
        save_mesh_obj(out, mesh);
    else
        save_mesh_ply(out, mesh);
    MeshAudit audit = audit_mesh(mesh);
    std::printf("extract-mesh: %zu vertices, %zu faces, boundary edges %ld -> %s\n",
                mesh.vertices.size(), mesh.faces.size(), audit.boundary_edges,
                out.c_str());
    return 0;
}

int cmd_eval(const TrainConfig& cfg, const std::string& checkpoint,
             const std::string& data, const std::string& preset, int mc_resolution,
             const std::string& out) {
    CheckpointContents ck = peek_checkpoint(checkpoint);
    Dataset ds = load_dataset(data);
    const std::vector<SceneView>& views = ds.test.empty() ? ds.train : ds.test;
    std::vector<EvalRow> rows;
    eval_branches(ck.field, ck.gaussians, views, cfg.sampler, rows);
    double chamfer = chamfer_vs_scene(ck.field, scene_from_preset(preset),
                                      mc_resolution, cfg.seed);

    std::ofstream csv(out);
    if (!csv) throw std::runtime_error("eval: cannot write " + out);
    csv << "branch,view,psnr,ssim\n";
    double mean_gs = 0, mean_sdf = 0;
    int n_gs = 0, n_sdf = 0;
    for (const EvalRow& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f\n", r.branch.c_str(), r.view,
                      r.psnr_v, r.ssim_v);
        csv << line;
        if (r.branch == "gs") {
            mean_gs += r.psnr_v;
            n_gs++;
        } else {
            mean_sdf += r.psnr_v;
            n_sdf++;
        }
    }
    if (n_gs) mean_gs /= n_gs;
    if (n_sdf) mean_sdf /= n_sdf;
    char line[160];
    std::snprintf(line, sizeof(line), "mean_gs,,%.6f,\nmean_sdf,,%.6f,\nchamfer,,%.6f,\n",
                  mean_gs, mean_sdf, chamfer);
    csv << line;
    std::printf("eval: gs PSNR %.2f dB, sdf PSNR %.2f dB, chamfer %.5f -> %s\n", mean_gs,
                mean_sdf, chamfer, out.c_str());
    return 0;
}

int cmd_ablate(const TrainConfig& base, const std::string& config_path,
               const std::string& data, const std::string& preset,
               const std::string& run) {
    Dataset ds = load_dataset(data);
    emit_manifest("ablate", config_path, run, base.seed);
    std::ofstream csv(run + "/ablation.csv");
    if (!csv) throw std::runtime_error("ablate: cannot write in " + run);
    csv << "variant,psnr_gs,chamfer\n";
    for (const AblationVariant& var : ablation_switches(base)) {
        std::string sub = run + "/" + var.name;
        Trainer trainer(ds, var.config);
        trainer.run(sub);
        const std::vector<SceneView>& views = ds.test.empty() ? ds.train : ds.test;
        double mean_psnr = 0;
        for (const SceneView& v : views) {
            BranchRender gs = render_gs_branch(trainer.gaussians, v.camera);
            mean_psnr += std::min(psnr(gs.color, v.color), 99.0);
        }
        mean_psnr /= double(views.size());
        double chamfer = chamfer_vs_scene(trainer.field, scene_from_preset(preset), 96,
                                          var.config.seed);
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", var.name.c_str(), mean_psnr,
                      chamfer);
        csv << line;
        csv.flush();
        std::printf("ablate[%s]: PSNR %.2f dB, chamfer %.5f\n", var.name.c_str(),
                    mean_psnr, chamfer);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gsdf: dual-branch gaussian-splatting + neural SDF reconstruction"};
    app.require_subcommand(1);
    app.fallthrough();  // allow global options after the subcommand
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)");

    std::string config_path, data_dir, run_dir, checkpoint, out_path, resume;
    std::string preset = "sphere-box", branch = "sdf";
    std::vector<std::string> overrides;
    int views = 16, res = 64, mc_resolution = 96;
    uint64_t seed = 1;
    bool seed_set = false;

    auto* gen = app.add_subcommand("gen-scene", "render an analytic dataset");
    gen->add_option("--preset", preset, "sphere | sphere-box");
    gen->add_option("--views", views);
    gen->add_option("--res", res);
    gen->add_option("--seed", seed);
    gen->add_option("--out", out_path)->required();

    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (default: desk preset)");
        cmd->add_option("--set", overrides, "override config keys, e.g. --set seed=3");
        cmd->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
    };

    auto* train = app.add_subcommand("train", "run the training schedule");
    add_config_opts(train);
    train->add_option("--data", data_dir)->required();
    train->add_option("--run", run_dir)->required();
    train->add_option("--resume", resume, "checkpoint to continue from");

    auto* render = app.add_subcommand("render", "render views from a checkpoint");
    add_config_opts(render);
    render->add_option("--checkpoint", checkpoint)->required();
    render->add_option("--data", data_dir)->required();
    render->add_option("--branch", branch, "gs | sdf");
    render->add_option("--out", out_path)->required();

    auto* mesh = app.add_subcommand("extract-mesh", "marching cubes on the SDF");
    mesh->add_option("--checkpoint", checkpoint)->required();
    mesh->add_option("--res", mc_resolution);
    mesh->add_option("--out", out_path)->required();

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM/Chamfer tables");
    add_config_opts(eval);
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--preset", preset, "analytic scene for Chamfer ground truth");
    eval->add_option("--mc-res", mc_resolution);
    eval->add_option("--out", out_path)->required();

    auto* ablate = app.add_subcommand("ablate", "run the ablation variants");
    add_config_opts(ablate);
    ablate->add_option("--data", data_dir)->required();
    ablate->add_option("--preset", preset);
    ablate->add_option("--run", run_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        // unknown command / bad usage
        return code == 0 ? 0 : 2;
    }

    try {
        apply_threads(threads);
        if (gen->parsed()) return cmd_gen_scene(preset, views, res, seed, out_path);

        TrainConfig cfg = load_config_with_overrides(config_path, overrides);
        if (seed_set) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;

        if (train->parsed())
            return cmd_train(cfg, config_path, data_dir, run_dir, resume);
        if (render->parsed())
            return cmd_render(cfg, checkpoint, data_dir, branch, out_path);
        if (mesh->parsed()) return cmd_extract_mesh(checkpoint, mc_resolution, out_path);
        if (eval->parsed())
            return cmd_eval(cfg, checkpoint, data_dir, preset, mc_resolution, out_path);
        if (ablate->parsed())
            return cmd_ablate(cfg, config_path, data_dir, preset, run_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
