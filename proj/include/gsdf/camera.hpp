#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gsdf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

/// Pinhole camera. Convention: right-handed, camera looks down +z,
/// pixel centers at (px+0.5, py+0.5).
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::Identity();   // camera -> world
    Vec3 translation = Vec3::Zero();    // camera origin in world

    Vec3 position() const { return translation; }

    // world -> camera
    Vec3 to_camera(const Vec3& x_world) const {
        return rotation.transpose() * (x_world - translation);
    }
    Vec3 to_world(const Vec3& x_cam) const {
        return rotation * x_cam + translation;
    }
};

void validate(const Camera& cam);

Ray ray_for_pixel(const Camera& cam, double px, double py);

struct Projection {
    double px = 0, py = 0, depth = 0;
    bool visible = false;
};

Projection project_point(const Camera& cam, const Vec3& x_world);

// Structured-text camera file: one record per view. See docs/formats.md.
void save_cameras(const std::string& path, const std::vector<Camera>& cams);
std::vector<Camera> load_cameras(const std::string& path);

}  // namespace gsdf
