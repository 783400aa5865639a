#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "gsdf/mesh.hpp"
#include "gsdf/metrics.hpp"
#include "helpers.hpp"

using namespace gsdf;
using namespace gsdf::testing;

namespace {

double sphere_sdf(const Vec3& x) { return x.norm() - 0.5; }

double box_sdf(const Vec3& x) {
    Vec3 q = x.cwiseAbs() - Vec3(0.4, 0.3, 0.35);
    double outside = q.cwiseMax(0.0).norm();
    double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
}

}  // namespace

TEST_CASE("marching_cubes: uniform sign gives an empty mesh") {
    TriangleMesh m = marching_cubes([](const Vec3&) { return 1.0; }, Vec3(-1, -1, -1),
                                    Vec3(1, 1, 1), 16);
    CHECK(m.vertices.empty());
    CHECK(m.faces.empty());
}

TEST_CASE("marching_cubes: sphere vertices at the analytic radius") {
    TriangleMesh m =
        marching_cubes(sphere_sdf, Vec3(-1, -1, -1), Vec3(1, 1, 1), 64);
    REQUIRE(m.vertices.size() > 100);
    for (const Vec3& v : m.vertices) {
        CHECK(v.norm() >= 0.48);
        CHECK(v.norm() <= 0.52);
    }
    MeshAudit audit = audit_mesh(m);
    CHECK(audit.watertight());
    CHECK(mesh_area(m) == doctest::Approx(4 * M_PI * 0.25).epsilon(0.02));

    // SDF residual bound at mesh vertices
    double cell = 2.0 / 64.0;
    for (const Vec3& v : m.vertices)
        CHECK(std::abs(sphere_sdf(v)) < 2.0 * cell * std::sqrt(3.0));
}

TEST_CASE("marching_cubes: box mesh is watertight") {
    TriangleMesh m = marching_cubes(box_sdf, Vec3(-1, -1, -1), Vec3(1, 1, 1), 48);
    REQUIRE(!m.faces.empty());
    MeshAudit audit = audit_mesh(m);
    CHECK(audit.boundary_edges == 0);
    CHECK(audit.nonmanifold_edges == 0);
}

TEST_CASE("marching_cubes: resolution doubling does not hurt sphere accuracy") {
    auto max_radius_err = [](int res) {
        TriangleMesh m = marching_cubes(sphere_sdf, Vec3(-1, -1, -1), Vec3(1, 1, 1), res);
        double e = 0.0;
        for (const Vec3& v : m.vertices) e = std::max(e, std::abs(v.norm() - 0.5));
        return e;
    };
    CHECK(max_radius_err(64) <= max_radius_err(32) + 1e-12);
}

TEST_CASE("marching_cubes rejects non-finite field samples") {
    CHECK_THROWS(marching_cubes([](const Vec3& x) { return x.x() > 0 ? std::nan("") : 1.0; },
                                Vec3(-1, -1, -1), Vec3(1, 1, 1), 8));
}

TEST_CASE("mesh file round trips") {
    TriangleMesh m = marching_cubes(sphere_sdf, Vec3(-1, -1, -1), Vec3(1, 1, 1), 16);
    save_mesh_obj("tmp_mesh.obj", m);
    TriangleMesh back = load_mesh_obj("tmp_mesh.obj");
    std::remove("tmp_mesh.obj");
    REQUIRE(back.vertices.size() == m.vertices.size());
    REQUIRE(back.faces.size() == m.faces.size());
    for (size_t i = 0; i < m.vertices.size(); ++i)
        CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-6);
    for (size_t i = 0; i < m.faces.size(); ++i) CHECK(back.faces[i] == m.faces[i]);
    CHECK_NOTHROW(save_mesh_ply("tmp_mesh.ply", m));
    std::remove("tmp_mesh.ply");
}

TEST_CASE("sample_mesh_surface stays on the surface") {
    TriangleMesh m = marching_cubes(sphere_sdf, Vec3(-1, -1, -1), Vec3(1, 1, 1), 32);
    std::mt19937_64 rng(3);
    std::vector<Vec3> pts = sample_mesh_surface(m, 5000, rng);
    REQUIRE(pts.size() == 5000);
    for (const Vec3& p : pts) CHECK(std::abs(p.norm() - 0.5) < 0.05);
}

TEST_CASE("chamfer_distance examples and properties") {
    std::vector<Vec3> a = {Vec3(0, 0, 0)};
    std::vector<Vec3> b = {Vec3(1, 0, 0)};
    CHECK(chamfer_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(chamfer_distance(a, a) == doctest::Approx(0.0));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<Vec3> p, q;
    for (int i = 0; i < 500; ++i) {
        p.push_back(Vec3(uni(rng), uni(rng), uni(rng)));
        q.push_back(Vec3(uni(rng), uni(rng), uni(rng)));
    }
    CHECK(chamfer_distance(p, q) == doctest::Approx(chamfer_distance(q, p)).epsilon(1e-12));
    CHECK(chamfer_distance(p, p) == doctest::Approx(0.0));
    CHECK_THROWS(chamfer_distance(p, {}));

    // spatial-index result equals brute force
    std::vector<Vec3> small_a(p.begin(), p.begin() + 60);
    std::vector<Vec3> small_b(q.begin(), q.begin() + 45);
    auto brute = [](const std::vector<Vec3>& A, const std::vector<Vec3>& B) {
        double sum_ab = 0, sum_ba = 0;
        for (const Vec3& x : A) {
            double best = 1e300;
            for (const Vec3& y : B) best = std::min(best, (x - y).norm());
            sum_ab += best;
        }
        for (const Vec3& y : B) {
            double best = 1e300;
            for (const Vec3& x : A) best = std::min(best, (x - y).norm());
            sum_ba += best;
        }
        return 0.5 * (sum_ab / A.size() + sum_ba / B.size());
    };
    CHECK(chamfer_distance(small_a, small_b) ==
          doctest::Approx(brute(small_a, small_b)).epsilon(1e-12));
}

TEST_CASE("psnr examples") {
    ImageBuffer a(8, 8, 3, 0.5);
    CHECK(std::isinf(psnr(a, a)));

    ImageBuffer b = a;
    for (double& v : b.data) v += 0.1;  // MSE = 0.01
    CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK_THROWS(psnr(a, ImageBuffer(4, 4, 3)));
}
