#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "gsdf/gaussians.hpp"
#include "helpers.hpp"

using namespace gsdf;
using namespace gsdf::testing;

namespace {

Vec4 random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Vec4 q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    return q / q.norm();
}

GaussianPrimitive random_primitive(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    GaussianPrimitive g;
    g.mean = Vec3(uni(rng), uni(rng), uni(rng));
    g.log_scale = Vec3(uni(rng), uni(rng), uni(rng)) - Vec3(2, 2, 2);
    g.quat = random_unit_quat(rng);
    g.opacity_logit = 2.0 * uni(rng);
    g.color_logit = Vec3(uni(rng), uni(rng), uni(rng));
    return g;
}

}  // namespace

TEST_CASE("covariance: axis-aligned and isotropic cases") {
    Vec4 ident(1, 0, 0, 0);
    Mat3 c = covariance(Vec3(1, 2, 3), ident);
    CHECK((c - Vec3(1, 4, 9).asDiagonal().toDenseMatrix()).norm() < 1e-12);

    std::mt19937_64 rng(2);
    Mat3 iso = covariance(Vec3(0.7, 0.7, 0.7), random_unit_quat(rng));
    CHECK((iso - 0.49 * Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("covariance: 90-degree rotation about z") {
    // scale (1,2,1) rotated z->: x axis maps to y
    double s = std::sin(M_PI / 4), cw = std::cos(M_PI / 4);
    Vec4 q(cw, 0, 0, s);  // 90 degrees about z
    Mat3 c = covariance(Vec3(1, 2, 1), q);
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    Vec3 ev = es.eigenvalues();  // ascending
    CHECK(ev(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ev(1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ev(2) == doctest::Approx(4.0).epsilon(1e-9));
    Vec3 lead = es.eigenvectors().col(2);
    CHECK(std::abs(std::abs(lead.dot(Vec3(1, 0, 0))) - 1.0) < 1e-9);  // y-scale came from x axis
}

TEST_CASE("covariance eigenvalues recover squared scales on 1000 random primitives") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.05, 2.0);
    for (int i = 0; i < 1000; ++i) {
        Vec3 s(uni(rng), uni(rng), uni(rng));
        Mat3 c = covariance(s, random_unit_quat(rng));
        CHECK((c - c.transpose()).norm() < 1e-9);
        Eigen::SelfAdjointEigenSolver<Mat3> es(c);
        Vec3 ev = es.eigenvalues();
        Vec3 want(s.x() * s.x(), s.y() * s.y(), s.z() * s.z());
        std::sort(want.data(), want.data() + 3);
        for (int a = 0; a < 3; ++a) CHECK(std::abs(ev(a) - want(a)) < 1e-6);
    }
}

TEST_CASE("covariance normalizes a non-unit quaternion") {
    Mat3 a = covariance(Vec3(1, 2, 3), Vec4(2, 0, 0, 0));
    Mat3 b = covariance(Vec3(1, 2, 3), Vec4(1, 0, 0, 0));
    CHECK((a - b).norm() < 1e-12);
}

TEST_CASE("gaussian_value hand cases") {
    GaussianPrimitive g;
    g.log_scale = Vec3::Zero();  // unit scales -> identity covariance
    DecodedGaussian d = decode(g);
    CHECK(gaussian_value(d, d.mean) == doctest::Approx(1.0));
    CHECK(gaussian_value(d, d.mean + Vec3(1, 0, 0)) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
    CHECK(std::exp(-0.5) == doctest::Approx(0.606531).epsilon(1e-6));
}

TEST_CASE("gaussian_value rotation invariance and upper bound") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        GaussianPrimitive g = random_primitive(rng);
        DecodedGaussian d = decode(g);
        Vec3 x = d.mean + Vec3(uni(rng), uni(rng), uni(rng));
        double v = gaussian_value(d, x);
        CHECK(v > 0.0);
        CHECK(v <= 1.0);

        // rotate offset and primitive jointly: value unchanged
        Mat3 R = Eigen::AngleAxisd(uni(rng) * 3, Vec3(uni(rng), uni(rng), uni(rng)).normalized())
                     .toRotationMatrix();
        DecodedGaussian dr = d;
        dr.rotation = R * d.rotation;
        Vec3 xr = d.mean + R * (x - d.mean);
        CHECK(gaussian_value(dr, xr) == doctest::Approx(v).epsilon(1e-9));
    }
}

TEST_CASE("normal_of: smallest-scale axis with tie break") {
    GaussianPrimitive g;
    g.log_scale = Vec3(0.0, 0.0, std::log(0.1));
    DecodedGaussian d = decode(g);
    Vec3 n = normal_of(d);
    CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-12);

    // rotation mapping z to x (90 degrees about y)
    double s = std::sin(M_PI / 4), c = std::cos(M_PI / 4);
    g.quat = Vec4(c, 0, s, 0);
    d = decode(g);
    n = normal_of(d);
    CHECK(std::abs(std::abs(n.x()) - 1.0) < 1e-9);

    // isotropic: tie broken to axis x
    g = GaussianPrimitive{};
    d = decode(g);
    CHECK(smallest_scale_axis(d.scale) == 0);
    CHECK(std::abs(std::abs(normal_of(d).x()) - 1.0) < 1e-12);
}

TEST_CASE("normal_of flips toward the camera") {
    GaussianPrimitive g;
    g.log_scale = Vec3(0.0, 0.0, std::log(0.1));
    DecodedGaussian d = decode(g);
    Vec3 cam_front(0, 0, -3);
    Vec3 n = normal_of(d, &cam_front);
    CHECK(n.dot(cam_front - d.mean) >= 0.0);
    Vec3 cam_back(0, 0, 3);
    Vec3 n2 = normal_of(d, &cam_back);
    CHECK(n2.dot(cam_back - d.mean) >= 0.0);
}

TEST_CASE("decode invariants") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        DecodedGaussian d = decode(random_primitive(rng));
        CHECK(d.scale.minCoeff() > 0.0);
        CHECK(d.opacity > 0.0);
        CHECK(d.opacity < 1.0);
        for (int c = 0; c < 3; ++c) {
            CHECK(d.color[c] > 0.0);
            CHECK(d.color[c] < 1.0);
        }
        CHECK((d.rotation * d.rotation.transpose() - Mat3::Identity()).norm() < 1e-9);
    }
}

TEST_CASE("log-scale floor keeps scales bounded away from zero") {
    GaussianPrimitive g;
    g.log_scale = Vec3(-100, -100, -100);
    DecodedGaussian d = decode(g);
    CHECK(d.scale.minCoeff() >= std::exp(kLogScaleFloor) * (1 - 1e-12));
}

TEST_CASE("accumulate_stats running means") {
    GaussianSet set;
    set.primitives.resize(2);
    set.resize_stats();

    // constant inputs over K steps -> means equal the constants
    for (int k = 0; k < 10; ++k) accumulate_stats(set, {0.5, 0.0}, {0.25, 0.0});
    CHECK(set.stats[0].grad_accum == doctest::Approx(0.5));
    CHECK(set.stats[0].opacity_accum == doctest::Approx(0.25));
    CHECK(set.stats[1].grad_accum == doctest::Approx(0.0));
    CHECK(set.stats[0].count == 10);

    // alternating 0/1 opacity over even K -> 0.5
    set.stats[0].reset();
    set.stats[1].reset();
    for (int k = 0; k < 10; ++k)
        accumulate_stats(set, {0.0, 0.0}, {k % 2 ? 1.0 : 0.0, 0.0});
    CHECK(set.stats[0].opacity_accum == doctest::Approx(0.5));

    CHECK_THROWS(accumulate_stats(set, {0.0}, {0.0, 0.0}));
}

TEST_CASE("quaternion rotation backward matches finite differences") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
        Vec4 q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        if (q.norm() < 0.1) continue;
        Mat3 R_bar;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) R_bar(r, c) = gauss(rng);
        auto loss = [&](const Vec4& qq) {
            return (quat_to_rotation(qq).array() * R_bar.array()).sum();
        };
        Vec4 grad = quat_rotation_backward(q, R_bar);
        const double h = 1e-6;
        for (int a = 0; a < 4; ++a) {
            Vec4 qp = q, qm = q;
            qp[a] += h;
            qm[a] -= h;
            double fd = (loss(qp) - loss(qm)) / (2 * h);
            CHECK(rel_err(grad[a], fd, 1e-7) < 1e-3);
        }
    }
}

TEST_CASE("initialization modes") {
    std::mt19937_64 rng(13);
    GaussianSet a = init_random_in_box(200, Vec3(-1, -1, -1), Vec3(1, 1, 1), 0.05, rng);
    REQUIRE(a.size() == 200);
    REQUIRE(a.stats.size() == 200);
    for (const auto& g : a.primitives) {
        CHECK(g.mean.cwiseAbs().maxCoeff() <= 1.0);
        CHECK(decode(g).scale.x() == doctest::Approx(0.05));
    }

    std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0.5, 0, 0), Vec3(0, 0.5, 0)};
    std::vector<Vec3> cols = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    GaussianSet b = init_from_points(pts, cols, 0.01, 0.05, rng);
    REQUIRE(b.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK((b.primitives[i].mean - pts[i]).norm() <= 0.01 * 6.0);
        Vec3 c = decode(b.primitives[i]).color;
        for (int k = 0; k < 3; ++k) CHECK(std::abs(c[k] - std::clamp(cols[i][k], 0.01, 0.99)) < 0.05);
    }
}

TEST_CASE("ply and binary round trips") {
    std::mt19937_64 rng(17);
    GaussianSet set;
    for (int i = 0; i < 25; ++i) set.primitives.push_back(random_primitive(rng));
    set.resize_stats();

    save_ply("tmp_gauss.ply", set);
    GaussianSet ply = load_ply("tmp_gauss.ply");
    std::remove("tmp_gauss.ply");
    REQUIRE(ply.size() == set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK((ply.primitives[i].mean - set.primitives[i].mean).norm() < 1e-5);
        CHECK((ply.primitives[i].quat - set.primitives[i].quat).norm() < 1e-5);
        CHECK(std::abs(ply.primitives[i].opacity_logit - set.primitives[i].opacity_logit) < 1e-5);
    }

    std::stringstream ss;
    save_gaussians(ss, set);
    GaussianSet bin = load_gaussians(ss);
    REQUIRE(bin.size() == set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK(bin.primitives[i].mean == set.primitives[i].mean);  // bit-exact
        CHECK(bin.primitives[i].quat == set.primitives[i].quat);
        CHECK(bin.primitives[i].opacity_logit == set.primitives[i].opacity_logit);
        CHECK(bin.primitives[i].log_scale == set.primitives[i].log_scale);
        CHECK(bin.primitives[i].color_logit == set.primitives[i].color_logit);
    }
}
