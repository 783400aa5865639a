#include "gsdf/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsdf {

void validate(const Camera& cam) {
    if (cam.fx <= 0 || cam.fy <= 0)
        throw std::invalid_argument("camera: focal lengths must be positive");
    if (cam.width <= 0 || cam.height <= 0)
        throw std::invalid_argument("camera: resolution must be positive");
    Mat3 rtr = cam.rotation.transpose() * cam.rotation;
    if ((rtr - Mat3::Identity()).norm() > 1e-6 || cam.rotation.determinant() < 0)
        throw std::invalid_argument("camera: rotation must be orthonormal with det +1");
}

Ray ray_for_pixel(const Camera& cam, double px, double py) {
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
        throw std::out_of_range("ray_for_pixel: pixel outside image");
    const double u = px + 0.5;
    const double v = py + 0.5;
    Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    Vec3 dir_world = cam.rotation * dir_cam;
    return Ray{cam.position(), dir_world.normalized()};
}

Projection project_point(const Camera& cam, const Vec3& x_world) {
    Vec3 p = cam.to_camera(x_world);
    Projection out;
    if (p.z() <= 1e-6) return out;  // behind camera: not visible
    out.px = cam.fx * p.x() / p.z() + cam.cx;
    out.py = cam.fy * p.y() / p.z() + cam.cy;
    out.depth = p.z();
    out.visible = true;
    return out;
}

void save_cameras(const std::string& path, const std::vector<Camera>& cams) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_cameras: cannot open " + path);
    f.precision(17);
    f << "gsdf_cameras 1\n" << cams.size() << "\n";
    for (const Camera& c : cams) {
        f << c.fx << " " << c.fy << " " << c.cx << " " << c.cy << " "
          << c.width << " " << c.height << "\n";
        // 3x4 camera->world pose, row-major
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) f << c.rotation(r, k) << " ";
            f << c.translation(r) << "\n";
        }
    }
}

std::vector<Camera> load_cameras(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_cameras: cannot open " + path);
    std::string magic;
    int version = 0;
    f >> magic >> version;
    if (magic != "gsdf_cameras" || version != 1)
        throw std::runtime_error("load_cameras: bad header in " + path);
    size_t n = 0;
    f >> n;
    std::vector<Camera> cams(n);
    for (Camera& c : cams) {
        f >> c.fx >> c.fy >> c.cx >> c.cy >> c.width >> c.height;
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) f >> c.rotation(r, k);
            f >> c.translation(r);
        }
        validate(c);
    }
    if (!f) throw std::runtime_error("load_cameras: truncated file " + path);
    return cams;
}

}  // namespace gsdf
