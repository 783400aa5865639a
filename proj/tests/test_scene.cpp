#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gsdf/scene.hpp"
#include "helpers.hpp"

using namespace gsdf;
using namespace gsdf::testing;

namespace {

AnalyticScene unit_sphere_scene(double r) { return make_sphere_scene(r); }

// Camera at distance `d` on -z looking at the origin.
Camera front_camera(double d, int res) {
    Camera cam;
    cam.width = cam.height = res;
    cam.fx = cam.fy = res;
    cam.cx = cam.cy = res / 2.0;
    cam.translation = Vec3(0, 0, -d);
    cam.rotation = Mat3::Identity();
    return cam;
}

}  // namespace

TEST_CASE("analytic_sdf: sphere and box hand values") {
    AnalyticScene s = unit_sphere_scene(1.0);
    CHECK(analytic_sdf(s, Vec3(0, 0, 0)) == doctest::Approx(-1.0));
    CHECK(analytic_sdf(s, Vec3(2, 0, 0)) == doctest::Approx(1.0));

    AnalyticScene b;
    ScenePrimitive box;
    box.kind = ShapeKind::Box;
    box.size = Vec3(1, 1, 1);
    b.primitives.push_back(box);
    CHECK(analytic_sdf(b, Vec3(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(analytic_sdf(b, Vec3(0, 0, 0)) == doctest::Approx(-1.0));
}

TEST_CASE("analytic_sdf union takes the min") {
    AnalyticScene s = make_sphere_box_scene();
    REQUIRE(s.primitives.size() == 2);
    double direct = analytic_sdf(s, Vec3(0, 0, 0));
    Vec3 albedo;
    double via_albedo = analytic_sdf_albedo(s, Vec3(0, 0, 0), albedo);
    CHECK(direct == doctest::Approx(via_albedo));
    AnalyticScene only_sphere;
    only_sphere.primitives.push_back(s.primitives[0]);
    AnalyticScene only_box;
    only_box.primitives.push_back(s.primitives[1]);
    CHECK(direct == doctest::Approx(std::min(analytic_sdf(only_sphere, Vec3(0, 0, 0)),
                                             analytic_sdf(only_box, Vec3(0, 0, 0)))));
}

TEST_CASE("analytic sdf gradient has unit norm away from creases") {
    AnalyticScene s = make_sphere_box_scene();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double h = 1e-5;
    int checked = 0;
    while (checked < 200) {
        Vec3 x(uni(rng), uni(rng), uni(rng));
        // skip near-crease points: distances of the two shapes nearly equal
        AnalyticScene a, b;
        a.primitives.push_back(s.primitives[0]);
        b.primitives.push_back(s.primitives[1]);
        if (std::abs(analytic_sdf(a, x) - analytic_sdf(b, x)) < 0.05) continue;
        // skip box-face creases and, inside the box, edge creases where the
        // dominant axis of the distance switches
        Vec3 q = (x - s.primitives[1].center).cwiseAbs() - s.primitives[1].size;
        int near_zero = 0;
        for (int k = 0; k < 3; ++k)
            if (std::abs(q[k]) < 0.02) ++near_zero;
        if (near_zero > 0) continue;
        std::array<double, 3> qs = {q[0], q[1], q[2]};
        std::sort(qs.begin(), qs.end());
        if (qs[2] < 0.0 && qs[2] - qs[1] < 0.02) continue;
        // skip the sphere center, where the direction is undefined
        if ((x - s.primitives[0].center).norm() < 0.02) continue;
        Vec3 g;
        for (int k = 0; k < 3; ++k) {
            Vec3 xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            g[k] = (analytic_sdf(s, xp) - analytic_sdf(s, xm)) / (2 * h);
        }
        CHECK(std::abs(g.norm() - 1.0) < 1e-3);
        ++checked;
    }
}

TEST_CASE("sphere_trace matches the analytic intersection on 1000 rays") {
    AnalyticScene s = unit_sphere_scene(0.5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int hits = 0;
    while (hits < 1000) {
        Vec3 o(uni(rng) * 3, uni(rng) * 3, uni(rng) * 3);
        if (o.norm() < 1.0) continue;
        Vec3 target(0.2 * uni(rng), 0.2 * uni(rng), 0.2 * uni(rng));
        Vec3 d = (target - o).normalized();
        double b = 2 * o.dot(d), c = o.squaredNorm() - 0.25;
        double disc = b * b - 4 * c;
        if (disc <= 1e-4) continue;
        double t_true = (-b - std::sqrt(disc)) / 2;
        double t = sphere_trace(s, Ray{o, d});
        REQUIRE(t > 0);
        CHECK(std::abs(t - t_true) < 1e-3);
        ++hits;
    }
    // a miss reports a negative distance
    CHECK(sphere_trace(s, Ray{Vec3(3, 3, 3), Vec3(1, 0, 0)}) < 0);
}

TEST_CASE("render_ground_truth: center-pixel depth, normals, mask") {
    AnalyticScene s = unit_sphere_scene(0.5);
    Camera cam = front_camera(2.0, 33);  // odd res: a pixel center on the axis
    cam.cx = cam.cy = 16.5;              // pixel (16,16) center maps to the axis
    GroundTruthMaps gt = render_ground_truth(s, cam);
    CHECK(gt.depth.at(16, 16) == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(gt.mask.at(16, 16) == doctest::Approx(1.0));
    CHECK(gt.mask.at(0, 0) == doctest::Approx(0.0));
    CHECK(gt.depth.at(0, 0) == doctest::Approx(0.0));  // background sentinel

    // hit-point normal on the sphere points along (hit - center)
    Ray r = ray_for_pixel(cam, 16, 16);
    double t = sphere_trace(s, r);
    Vec3 hit = r.origin + t * r.direction;
    Vec3 n(gt.normal.at(16, 16, 0), gt.normal.at(16, 16, 1), gt.normal.at(16, 16, 2));
    CHECK(n.normalized().dot(hit.normalized()) > 1.0 - 1e-3);
    for (double v : gt.normal.data) {
        CHECK(v >= -1.0 - 1e-9);
        CHECK(v <= 1.0 + 1e-9);
    }
    for (double v : gt.depth.data) CHECK(v >= 0.0);
    for (double v : gt.color.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-9);
    }
}

TEST_CASE("make_dataset: split sizes, orbit radius, determinism") {
    AnalyticScene s = make_sphere_box_scene();
    Dataset ds = make_dataset(s, 16, 16, 5);
    CHECK(ds.train.size() == 14);
    CHECK(ds.test.size() == 2);
    for (const SceneView& v : ds.train) {
        CHECK(v.camera.position().norm() > 1.6);
        CHECK(v.camera.position().norm() < 3.0);
        CHECK_NOTHROW(validate(v.camera));
    }
    CHECK_THROWS(make_dataset(s, 4, 16, 5));

    Dataset ds2 = make_dataset(s, 16, 16, 5);
    REQUIRE(ds2.train.size() == ds.train.size());
    for (size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(ds.train[i].color.data == ds2.train[i].color.data);
        CHECK((ds.train[i].camera.translation - ds2.train[i].camera.translation).norm() ==
              0.0);
    }
    Dataset ds3 = make_dataset(s, 16, 16, 6);  // different seed moves cameras
    bool any_diff = false;
    for (size_t i = 0; i < ds.train.size(); ++i)
        if ((ds.train[i].camera.translation - ds3.train[i].camera.translation).norm() > 1e-12)
            any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("dataset save/load round trip") {
    namespace fs = std::filesystem;
    AnalyticScene s = unit_sphere_scene(0.5);
    Dataset ds = make_dataset(s, 8, 16, 11);
    std::string dir = "tmp_dataset_rt";
    save_dataset(dir, ds);
    CHECK(fs::exists(dir + "/images"));
    CHECK(fs::exists(dir + "/depth"));
    CHECK(fs::exists(dir + "/normal"));
    CHECK(fs::exists(dir + "/masks"));
    CHECK(fs::exists(dir + "/cameras.txt"));
    CHECK(fs::exists(dir + "/split.txt"));
    Dataset back = load_dataset(dir);
    fs::remove_all(dir);
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.test.size() == ds.test.size());
    for (size_t i = 0; i < ds.train.size(); ++i) {
        const SceneView& a = ds.train[i];
        const SceneView& b = back.train[i];
        CHECK((a.camera.translation - b.camera.translation).norm() < 1e-9);
        REQUIRE(a.color.same_shape(b.color));
        for (size_t k = 0; k < a.color.data.size(); ++k)
            CHECK(std::abs(a.color.data[k] - b.color.data[k]) <= 0.5 / 255.0 + 1e-12);
        for (size_t k = 0; k < a.depth.data.size(); ++k)
            CHECK(std::abs(a.depth.data[k] - b.depth.data[k]) <=
                  1e-6 * std::max(1.0, std::abs(a.depth.data[k])));
        for (size_t k = 0; k < a.mask.data.size(); ++k)
            CHECK(a.mask.data[k] == doctest::Approx(b.mask.data[k]));
    }
}

TEST_CASE("sample_scene_surface lies on the union surface") {
    AnalyticScene s = make_sphere_box_scene();
    std::mt19937_64 rng(13);
    std::vector<Vec3> pts = sample_scene_surface(s, 2000, rng);
    REQUIRE(pts.size() == 2000);
    for (const Vec3& p : pts) CHECK(std::abs(analytic_sdf(s, p)) < 1e-5);
}

TEST_CASE("acceptance scene keeps primitives separated") {
    AnalyticScene s = make_sphere_box_scene();
    REQUIRE(s.primitives.size() == 2);
    const ScenePrimitive& sph = s.primitives[0];
    const ScenePrimitive& box = s.primitives[1];
    CHECK(sph.kind == ShapeKind::Sphere);
    CHECK(box.kind == ShapeKind::Box);
    CHECK(sph.size.x() == doctest::Approx(0.35));
    CHECK(box.size.x() == doctest::Approx(0.25));
    // nearest-point gap along the x axis exceeds 0.1
    double gap = (box.center.x() - box.size.x()) - (sph.center.x() + sph.size.x());
    CHECK(gap > 0.1);
    CHECK(sph.textured != box.textured);  // one textureless shape
}
