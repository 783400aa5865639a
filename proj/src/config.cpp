#include "gsdf/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gsdf {

using nlohmann::json;

namespace {

// Tracks which keys of a json object were consumed so leftovers can be
// reported as schema errors.
class Section {
 public:
    Section(const json& j, std::string prefix, std::vector<std::string>& unknown)
        : j_(j), prefix_(std::move(prefix)), unknown_(unknown) {
        if (!j_.is_object())
            throw ConfigError("config: '" + prefix_ + "' must be an object");
    }
    ~Section() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!consumed_.count(it.key())) unknown_.push_back(prefix_ + it.key());
    }

    template <typename T>
    void get(const char* key, T& field) {
        consumed_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        field = it->get<T>();
    }
    void get(const char* key, Vec3& field) {
        consumed_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        auto v = it->get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("config: '" + prefix_ + key + "' needs 3 numbers");
        field = Vec3(v[0], v[1], v[2]);
    }
    const json* sub(const char* key) {
        consumed_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

 private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string>& unknown_;
    std::set<std::string> consumed_;
};

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string to_json_string(const TrainConfig& c) {
    json j;
    j["schedule"] = {{"gs_warmup_iters", c.gs_warmup_iters},
                     {"sdf_warmup_iters", c.sdf_warmup_iters},
                     {"joint_iters", c.joint_iters},
                     {"rays_per_step", c.rays_per_step},
                     {"views_per_step", c.views_per_step},
                     {"checkpoint_every", c.checkpoint_every}};
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["init"] = {{"gaussians", c.init_gaussians},
                 {"mode", c.init_mode},
                 {"scale", c.init_scale},
                 {"jitter", c.init_jitter}};
    j["learning_rates"] = {{"grid", c.lr_grid},       {"mlp", c.lr_mlp},
                           {"sharpness", c.lr_sharpness}, {"mean", c.lr_mean},
                           {"mean_final", c.lr_mean_final}, {"scale", c.lr_scale},
                           {"rotation", c.lr_rotation}, {"opacity", c.lr_opacity},
                           {"color", c.lr_color}};
    j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
    j["switches"] = {{"guided_sampling", c.guided_sampling},
                     {"geometry_density_control", c.geometry_density_control},
                     {"mutual_supervision", c.mutual_supervision}};
    j["field"] = {{"levels", c.field.grid.levels},
                  {"base_resolution", c.field.grid.base_resolution},
                  {"max_resolution", c.field.grid.max_resolution},
                  {"feature_dim", c.field.grid.feature_dim},
                  {"table_size", c.field.grid.table_size},
                  {"hidden_width", c.field.hidden_width},
                  {"geo_feature_dim", c.field.geo_feature_dim},
                  {"sphere_prior", c.field.sphere_prior},
                  {"sphere_radius_frac", c.field.sphere_radius_frac},
                  {"init_sharpness", c.field.init_sharpness},
                  {"domain_min", vec3_json(c.field.domain_min)},
                  {"domain_max", vec3_json(c.field.domain_max)}};
    j["sampler"] = {{"k_coarse", c.sampler.k_coarse},
                    {"k_fine", c.sampler.k_fine},
                    {"samples_per_range", c.sampler.samples_per_range},
                    {"near", c.sampler.near},
                    {"far", c.sampler.far}};
    j["weights"] = {{"lambda1", c.weights.lambda1},
                    {"lambda_vol", c.weights.lambda_vol},
                    {"lambda_eik", c.weights.lambda_eik},
                    {"lambda_d", c.weights.lambda_d},
                    {"lambda_n", c.weights.lambda_n},
                    {"curv_peak", c.weights.curv_peak},
                    {"curv_after", c.weights.curv_after},
                    {"curv_ramp_iters", c.weights.curv_ramp_iters},
                    {"swap_l1_ssim", c.weights.swap_l1_ssim}};
    j["density"] = {{"sigma2", c.density.sigma2}, {"omega_g", c.density.omega_g},
                    {"omega_p", c.density.omega_p}, {"tau_g", c.density.tau_g},
                    {"tau_p", c.density.tau_p}, {"interval", c.density.interval}};
    j["progressive"] = {{"initial_active_levels", c.progressive.initial_active_levels},
                        {"step_iterations", c.progressive.step_iterations}};
    j["sdf"] = {{"warmup_samples", c.sdf_warmup_samples},
                {"curvature_epsilon", c.curvature_epsilon},
                {"curvature_points", c.curvature_points}};
    return j.dump(2) + "\n";
}

TrainConfig config_from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    TrainConfig c;
    std::vector<std::string> unknown;
    {
        Section root(j, "", unknown);
        root.get("seed", c.seed);
        root.get("threads", c.threads);
        if (const json* s = root.sub("schedule")) {
            Section sec(*s, "schedule.", unknown);
            sec.get("gs_warmup_iters", c.gs_warmup_iters);
            sec.get("sdf_warmup_iters", c.sdf_warmup_iters);
            sec.get("joint_iters", c.joint_iters);
            sec.get("rays_per_step", c.rays_per_step);
            sec.get("views_per_step", c.views_per_step);
            sec.get("checkpoint_every", c.checkpoint_every);
        }
        if (const json* s = root.sub("init")) {
            Section sec(*s, "init.", unknown);
            sec.get("gaussians", c.init_gaussians);
            sec.get("mode", c.init_mode);
            sec.get("scale", c.init_scale);
            sec.get("jitter", c.init_jitter);
        }
        if (const json* s = root.sub("learning_rates")) {
            Section sec(*s, "learning_rates.", unknown);
            sec.get("grid", c.lr_grid);
            sec.get("mlp", c.lr_mlp);
            sec.get("sharpness", c.lr_sharpness);
            sec.get("mean", c.lr_mean);
            sec.get("mean_final", c.lr_mean_final);
            sec.get("scale", c.lr_scale);
            sec.get("rotation", c.lr_rotation);
            sec.get("opacity", c.lr_opacity);
            sec.get("color", c.lr_color);
        }
        if (const json* s = root.sub("adam")) {
            Section sec(*s, "adam.", unknown);
            sec.get("beta1", c.adam.beta1);
            sec.get("beta2", c.adam.beta2);
            sec.get("eps", c.adam.eps);
        }
        if (const json* s = root.sub("switches")) {
            Section sec(*s, "switches.", unknown);
            sec.get("guided_sampling", c.guided_sampling);
            sec.get("geometry_density_control", c.geometry_density_control);
            sec.get("mutual_supervision", c.mutual_supervision);
        }
        if (const json* s = root.sub("field")) {
            Section sec(*s, "field.", unknown);
            sec.get("levels", c.field.grid.levels);
            sec.get("base_resolution", c.field.grid.base_resolution);
            sec.get("max_resolution", c.field.grid.max_resolution);
            sec.get("feature_dim", c.field.grid.feature_dim);
            sec.get("table_size", c.field.grid.table_size);
            sec.get("hidden_width", c.field.hidden_width);
            sec.get("geo_feature_dim", c.field.geo_feature_dim);
            sec.get("sphere_prior", c.field.sphere_prior);
            sec.get("sphere_radius_frac", c.field.sphere_radius_frac);
            sec.get("init_sharpness", c.field.init_sharpness);
            sec.get("domain_min", c.field.domain_min);
            sec.get("domain_max", c.field.domain_max);
        }
        if (const json* s = root.sub("sampler")) {
            Section sec(*s, "sampler.", unknown);
            sec.get("k_coarse", c.sampler.k_coarse);
            sec.get("k_fine", c.sampler.k_fine);
            sec.get("samples_per_range", c.sampler.samples_per_range);
            sec.get("near", c.sampler.near);
            sec.get("far", c.sampler.far);
        }
        if (const json* s = root.sub("weights")) {
            Section sec(*s, "weights.", unknown);
            sec.get("lambda1", c.weights.lambda1);
            sec.get("lambda_vol", c.weights.lambda_vol);
            sec.get("lambda_eik", c.weights.lambda_eik);
            sec.get("lambda_d", c.weights.lambda_d);
            sec.get("lambda_n", c.weights.lambda_n);
            sec.get("curv_peak", c.weights.curv_peak);
            sec.get("curv_after", c.weights.curv_after);
            sec.get("curv_ramp_iters", c.weights.curv_ramp_iters);
            sec.get("swap_l1_ssim", c.weights.swap_l1_ssim);
        }
        if (const json* s = root.sub("density")) {
            Section sec(*s, "density.", unknown);
            sec.get("sigma2", c.density.sigma2);
            sec.get("omega_g", c.density.omega_g);
            sec.get("omega_p", c.density.omega_p);
            sec.get("tau_g", c.density.tau_g);
            sec.get("tau_p", c.density.tau_p);
            sec.get("interval", c.density.interval);
        }
        if (const json* s = root.sub("progressive")) {
            Section sec(*s, "progressive.", unknown);
            sec.get("initial_active_levels", c.progressive.initial_active_levels);
            sec.get("step_iterations", c.progressive.step_iterations);
        }
        if (const json* s = root.sub("sdf")) {
            Section sec(*s, "sdf.", unknown);
            sec.get("warmup_samples", c.sdf_warmup_samples);
            sec.get("curvature_epsilon", c.curvature_epsilon);
            sec.get("curvature_points", c.curvature_points);
        }
    }
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    if (c.init_mode != "surface" && c.init_mode != "random")
        throw ConfigError("config: init.mode must be 'surface' or 'random'");
    return c;
}

TrainConfig desk_config() {
    TrainConfig c;
    c.field.grid.levels = 8;
    c.field.grid.base_resolution = 16;
    c.field.grid.max_resolution = 256;
    c.field.grid.table_size = 1u << 13;
    c.field.hidden_width = 32;
    c.progressive.step_iterations = 500;
    c.weights.curv_ramp_iters = 2000;
    return c;
}

TrainConfig paper_config() {
    TrainConfig c;
    c.gs_warmup_iters = 15000;
    c.sdf_warmup_iters = 2000;
    c.joint_iters = 30000;
    c.field.grid.levels = 16;
    c.field.grid.base_resolution = 32;
    c.field.grid.max_resolution = 2048;
    c.field.grid.table_size = 1u << 21;
    c.progressive.step_iterations = 2000;
    c.checkpoint_every = 5000;
    return c;
}

void save_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw ConfigError("config: cannot write " + path);
    f << to_json_string(cfg);
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json_string(ss.str());
}

uint64_t config_hash(const TrainConfig& cfg) {
    std::string s = to_json_string(cfg);
    uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

void write_manifest(const std::string& run_dir, const RunManifest& m) {
    std::filesystem::create_directories(run_dir);
    std::ofstream f(run_dir + "/manifest.txt");
    if (!f) throw std::runtime_error("write_manifest: cannot write in " + run_dir);
    f << "command " << m.command << "\n";
    f << "config " << m.config_path << "\n";
    f << "run_dir " << m.run_dir << "\n";
    f << "version " << m.version << "\n";
    f << "seed " << m.seed << "\n";
    f << "timestamp " << m.timestamp << "\n";
}

}  // namespace gsdf
