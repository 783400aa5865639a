#include "gsdf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gsdf {

namespace {

double primitive_sdf(const ScenePrimitive& p, const Vec3& x) {
    Vec3 q = x - p.center;
    switch (p.kind) {
        case ShapeKind::Sphere:
            return q.norm() - p.size.x();
        case ShapeKind::Box: {
            Vec3 d = q.cwiseAbs() - p.size;
            Vec3 outside = d.cwiseMax(0.0);
            double inside = std::min(d.maxCoeff(), 0.0);
            return outside.norm() + inside;
        }
        case ShapeKind::Torus: {
            double ring = std::hypot(q.x(), q.z()) - p.size.x();
            return std::hypot(ring, q.y()) - p.size.y();
        }
    }
    return 1e30;
}

Vec3 primitive_albedo(const ScenePrimitive& p, const Vec3& x) {
    Vec3 a = p.albedo;
    if (p.textured) {
        Vec3 q = x - p.center;
        double m = 0.7 + 0.3 * std::sin(14.0 * q.x()) * std::sin(14.0 * q.y()) *
                             std::sin(14.0 * q.z());
        a *= m;
    }
    return a;
}

}  // namespace

AnalyticScene make_sphere_scene(double radius) {
    AnalyticScene s;
    ScenePrimitive p;
    p.kind = ShapeKind::Sphere;
    p.center = Vec3::Zero();
    p.size = Vec3(radius, radius, radius);
    p.albedo = Vec3(0.75, 0.35, 0.25);
    p.textured = true;
    s.primitives.push_back(p);
    return s;
}

AnalyticScene make_sphere_box_scene() {
    AnalyticScene s;
    ScenePrimitive sphere;
    sphere.kind = ShapeKind::Sphere;
    sphere.center = Vec3(-0.42, 0.0, 0.0);
    sphere.size = Vec3(0.35, 0.35, 0.35);
    sphere.albedo = Vec3(0.8, 0.35, 0.25);
    sphere.textured = true;
    s.primitives.push_back(sphere);

    // Untextured box: every face is a flat color region.
    ScenePrimitive box;
    box.kind = ShapeKind::Box;
    box.center = Vec3(0.42, -0.05, 0.0);
    box.size = Vec3(0.25, 0.25, 0.25);
    box.albedo = Vec3(0.3, 0.5, 0.75);
    s.primitives.push_back(box);
    return s;
}

double analytic_sdf(const AnalyticScene& scene, const Vec3& x) {
    double best = 1e30;
    for (const ScenePrimitive& p : scene.primitives)
        best = std::min(best, primitive_sdf(p, x));
    return best;
}

double analytic_sdf_albedo(const AnalyticScene& scene, const Vec3& x, Vec3& albedo) {
    double best = 1e30;
    const ScenePrimitive* who = nullptr;
    for (const ScenePrimitive& p : scene.primitives) {
        double d = primitive_sdf(p, x);
        if (d < best) {
            best = d;
            who = &p;
        }
    }
    if (who) albedo = primitive_albedo(*who, x);
    return best;
}

double sphere_trace(const AnalyticScene& scene, const Ray& ray, double t_max) {
    double t = 0.0;
    for (int i = 0; i < 256; ++i) {
        double d = analytic_sdf(scene, ray.origin + t * ray.direction);
        if (d < 1e-4) return t;
        t += d;
        if (t > t_max) break;
    }
    return -1.0;
}

static Vec3 scene_normal(const AnalyticScene& scene, const Vec3& x) {
    const double h = 1e-5;
    Vec3 n;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        n[a] = analytic_sdf(scene, x + e) - analytic_sdf(scene, x - e);
    }
    double nn = n.norm();
    return nn > 1e-12 ? Vec3(n / nn) : Vec3(0, 0, 1);
}

GroundTruthMaps render_ground_truth(const AnalyticScene& scene, const Camera& camera) {
    GroundTruthMaps maps;
    maps.color = ImageBuffer(camera.width, camera.height, 3, 1.0);  // white background
    maps.depth = ImageBuffer(camera.width, camera.height, 1, 0.0);
    maps.normal = ImageBuffer(camera.width, camera.height, 3, 0.0);
    maps.mask = ImageBuffer(camera.width, camera.height, 1, 0.0);

    Vec3 light = -scene.light_dir.normalized();
#pragma omp parallel for schedule(dynamic, 4)
    for (int py = 0; py < camera.height; ++py) {
        for (int px = 0; px < camera.width; ++px) {
            Ray ray = ray_for_pixel(camera, px, py);
            double t = sphere_trace(scene, ray);
            if (t < 0) continue;
            Vec3 x = ray.origin + t * ray.direction;
            Vec3 n = scene_normal(scene, x);
            Vec3 albedo;
            analytic_sdf_albedo(scene, x, albedo);
            double shade = scene.ambient +
                           (1.0 - scene.ambient) * std::max(0.0, n.dot(light));
            for (int c = 0; c < 3; ++c)
                maps.color.at(px, py, c) = std::clamp(albedo[c] * shade, 0.0, 1.0);
            // depth = distance along the camera z axis, matching the renderers
            Vec3 x_cam = camera.to_camera(x);
            maps.depth.at(px, py) = x_cam.z();
            for (int c = 0; c < 3; ++c) maps.normal.at(px, py, c) = n[c];
            maps.mask.at(px, py) = 1.0;
        }
    }
    return maps;
}

Dataset make_dataset(const AnalyticScene& scene, int n_views, int resolution,
                     uint64_t seed) {
    if (n_views < 8) throw std::invalid_argument("make_dataset: need at least 8 views");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);

    Dataset ds;
    for (int i = 0; i < n_views; ++i) {
        double az = 2.0 * M_PI * i / n_views + jitter(rng);
        double el = 0.42 + 0.22 * std::sin(1.7 * i) + jitter(rng);
        double radius = 2.2 + jitter(rng);
        Vec3 pos(radius * std::cos(el) * std::cos(az),
                 radius * std::sin(el),
                 radius * std::cos(el) * std::sin(az));

        Camera cam;
        cam.width = cam.height = resolution;
        cam.fx = cam.fy = double(resolution);
        cam.cx = cam.cy = 0.5 * resolution;
        Vec3 up(0, 1, 0);
        Vec3 fwd = (-pos).normalized();
        if (std::abs(fwd.dot(up)) > 0.99) up = Vec3(1, 0, 0);
        Vec3 right = fwd.cross(up).normalized();
        Vec3 down = fwd.cross(right);
        cam.rotation.col(0) = right;
        cam.rotation.col(1) = down;
        cam.rotation.col(2) = fwd;
        cam.translation = pos;

        SceneView view;
        view.camera = cam;
        GroundTruthMaps maps = render_ground_truth(scene, cam);
        view.color = std::move(maps.color);
        view.depth = std::move(maps.depth);
        view.normal = std::move(maps.normal);
        view.mask = std::move(maps.mask);
        if (i % 8 == 7)
            ds.test.push_back(std::move(view));
        else
            ds.train.push_back(std::move(view));
    }
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    for (const char* sub : {"images", "depth", "normal", "masks"})
        fs::create_directories(dir + "/" + sub);

    // global index order: views interleaved back the way make_dataset split them
    std::vector<const SceneView*> all;
    std::vector<char> is_test;
    size_t ti = 0, si = 0;
    size_t total = ds.train.size() + ds.test.size();
    for (size_t i = 0; i < total; ++i) {
        if (i % 8 == 7 && si < ds.test.size()) {
            all.push_back(&ds.test[si++]);
            is_test.push_back(1);
        } else {
            all.push_back(&ds.train[ti++]);
            is_test.push_back(0);
        }
    }

    std::vector<Camera> cams;
    for (const SceneView* v : all) cams.push_back(v->camera);
    save_cameras(dir + "/cameras.txt", cams);

    std::ofstream split(dir + "/split.txt");
    if (!split) throw std::runtime_error("save_dataset: cannot write in " + dir);
    char buf[32];
    for (size_t i = 0; i < all.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%03zu", i);
        split << buf << " " << (is_test[i] ? "test" : "train") << "\n";
        write_ppm(dir + "/images/" + buf + ".ppm", all[i]->color);
        write_pfm(dir + "/depth/" + buf + ".pfm", all[i]->depth);
        write_pfm(dir + "/normal/" + buf + ".pfm", all[i]->normal);
        write_pgm(dir + "/masks/" + buf + ".pgm", all[i]->mask);
    }
}

Dataset load_dataset(const std::string& dir) {
    std::vector<Camera> cams = load_cameras(dir + "/cameras.txt");
    std::ifstream split(dir + "/split.txt");
    if (!split) throw std::runtime_error("load_dataset: cannot open " + dir + "/split.txt");
    Dataset ds;
    std::string name, tag;
    size_t i = 0;
    while (split >> name >> tag) {
        if (i >= cams.size())
            throw std::runtime_error("load_dataset: split.txt longer than cameras.txt");
        SceneView v;
        v.camera = cams[i++];
        v.color = read_ppm(dir + "/images/" + name + ".ppm");
        v.depth = read_pfm(dir + "/depth/" + name + ".pfm");
        v.normal = read_pfm(dir + "/normal/" + name + ".pfm");
        v.mask = read_pgm(dir + "/masks/" + name + ".pgm");
        if (tag == "test")
            ds.test.push_back(std::move(v));
        else
            ds.train.push_back(std::move(v));
    }
    return ds;
}

std::vector<Vec3> sample_scene_surface(const AnalyticScene& scene, int count,
                                       std::mt19937_64& rng) {
    // Area-weighted choice of primitive, rejection of points buried inside
    // another primitive of the union.
    std::vector<double> areas;
    for (const ScenePrimitive& p : scene.primitives) {
        switch (p.kind) {
            case ShapeKind::Sphere:
                areas.push_back(4.0 * M_PI * p.size.x() * p.size.x());
                break;
            case ShapeKind::Box: {
                const Vec3& b = p.size;
                areas.push_back(8.0 * (b.x() * b.y() + b.y() * b.z() + b.z() * b.x()));
                break;
            }
            case ShapeKind::Torus:
                areas.push_back(4.0 * M_PI * M_PI * p.size.x() * p.size.y());
                break;
        }
    }
    std::discrete_distribution<int> pick(areas.begin(), areas.end());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Vec3> out;
    out.reserve(count);
    long guard = 0;
    while (int(out.size()) < count && guard++ < 1000L * count) {
        const ScenePrimitive& p = scene.primitives[pick(rng)];
        Vec3 x;
        switch (p.kind) {
            case ShapeKind::Sphere: {
                Vec3 d(gauss(rng), gauss(rng), gauss(rng));
                if (d.norm() < 1e-9) continue;
                x = p.center + p.size.x() * d.normalized();
                break;
            }
            case ShapeKind::Box: {
                const Vec3& b = p.size;
                double fa[3] = {b.y() * b.z(), b.z() * b.x(), b.x() * b.y()};
                std::discrete_distribution<int> face(fa, fa + 3);
                int axis = face(rng);
                double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
                Vec3 q;
                for (int a = 0; a < 3; ++a) q[a] = (2.0 * uni(rng) - 1.0) * b[a];
                q[axis] = sign * b[axis];
                x = p.center + q;
                break;
            }
            case ShapeKind::Torus: {
                double u = 2.0 * M_PI * uni(rng);
                double v = 2.0 * M_PI * uni(rng);
                double R = p.size.x(), r = p.size.y();
                // correct for the smaller area on the inner side of the ring
                if (uni(rng) > (R + r * std::cos(v)) / (R + r)) continue;
                x = p.center + Vec3((R + r * std::cos(v)) * std::cos(u),
                                    r * std::sin(v),
                                    (R + r * std::cos(v)) * std::sin(u));
                break;
            }
        }
        if (analytic_sdf(scene, x) < -1e-6) continue;  // inside the union
        out.push_back(x);
    }
    if (int(out.size()) < count)
        throw std::runtime_error("sample_scene_surface: rejection sampling stalled");
    return out;
}

}  // namespace gsdf
