#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsdf/camera.hpp"
#include "gsdf/image.hpp"

namespace gsdf {

enum class ShapeKind { Sphere, Box, Torus };

struct ScenePrimitive {
    ShapeKind kind = ShapeKind::Sphere;
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3(0.5, 0.5, 0.5);  // sphere: x=radius; box: half-extents; torus: x=major,y=minor
    Vec3 albedo = Vec3(0.8, 0.8, 0.8);
    bool textured = false;  // low-frequency procedural albedo modulation
};

struct AnalyticScene {
    std::vector<ScenePrimitive> primitives;
    Vec3 light_dir = Vec3(0.4, 0.6, -0.7).normalized();
    double ambient = 0.25;
};

AnalyticScene make_sphere_scene(double radius = 0.5);
/// Default acceptance scene: sphere + box side by side, one textureless face.
AnalyticScene make_sphere_box_scene();

double analytic_sdf(const AnalyticScene& scene, const Vec3& x);
/// SDF of the nearest primitive plus its albedo.
double analytic_sdf_albedo(const AnalyticScene& scene, const Vec3& x, Vec3& albedo);

struct GroundTruthMaps {
    ImageBuffer color;   // 3ch
    ImageBuffer depth;   // 1ch; misses get 0
    ImageBuffer normal;  // 3ch
    ImageBuffer mask;    // 1ch
};

GroundTruthMaps render_ground_truth(const AnalyticScene& scene, const Camera& camera);

/// Sphere-trace a single ray; returns hit distance or a negative value on miss.
double sphere_trace(const AnalyticScene& scene, const Ray& ray, double t_max = 8.0);

struct SceneView {
    Camera camera;
    ImageBuffer color, depth, normal, mask;
};

struct Dataset {
    std::vector<SceneView> train;
    std::vector<SceneView> test;
};

/// Orbit cameras with jitter; deterministic 7/8-1/8 split by index stride.
Dataset make_dataset(const AnalyticScene& scene, int n_views, int resolution, uint64_t seed);

void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

/// Area-weighted surface samples of the analytic scene (for Chamfer).
std::vector<Vec3> sample_scene_surface(const AnalyticScene& scene, int count,
                                       std::mt19937_64& rng);

}  // namespace gsdf
