#include "gsdf/gaussians.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace gsdf {

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }
}  // namespace

void GaussianGrads::resize(size_t n) {
    mean.assign(n, Vec3::Zero());
    log_scale.assign(n, Vec3::Zero());
    color_logit.assign(n, Vec3::Zero());
    quat.assign(n, Vec4::Zero());
    opacity_logit.assign(n, 0.0);
}

void GaussianGrads::zero() {
    std::fill(mean.begin(), mean.end(), Vec3::Zero());
    std::fill(log_scale.begin(), log_scale.end(), Vec3::Zero());
    std::fill(color_logit.begin(), color_logit.end(), Vec3::Zero());
    std::fill(quat.begin(), quat.end(), Vec4::Zero());
    std::fill(opacity_logit.begin(), opacity_logit.end(), 0.0);
}

Mat3 quat_to_rotation(const Vec4& q_raw) {
    Vec4 q = q_raw / q_raw.norm();
    double w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 quat_rotation_backward(const Vec4& q_stored, const Mat3& R_bar) {
    double nrm = q_stored.norm();
    Vec4 q = q_stored / nrm;
    double w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3 dRdw, dRdx, dRdy, dRdz;
    dRdw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dRdx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dRdy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dRdz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    Vec4 qb(dRdw.cwiseProduct(R_bar).sum(), dRdx.cwiseProduct(R_bar).sum(),
            dRdy.cwiseProduct(R_bar).sum(), dRdz.cwiseProduct(R_bar).sum());
    // through the normalization q = q_stored/|q_stored|
    return (qb - q * q.dot(qb)) / nrm;
}

DecodedGaussian decode(const GaussianPrimitive& g) {
    DecodedGaussian d;
    d.mean = g.mean;
    for (int a = 0; a < 3; ++a)
        d.scale(a) = std::exp(std::max(g.log_scale(a), kLogScaleFloor));
    d.rotation = quat_to_rotation(g.quat);
    d.opacity = sigmoid(g.opacity_logit);
    for (int a = 0; a < 3; ++a) d.color(a) = sigmoid(g.color_logit(a));
    return d;
}

Mat3 covariance(const Vec3& scale, const Vec4& quat) {
    if (scale.minCoeff() <= 0)
        throw std::invalid_argument("covariance: scales must be positive");
    double dev = std::abs(quat.norm() - 1.0);
    if (dev > 1e-3)
        std::cerr << "covariance: quaternion deviates from unit length by " << dev
                  << ", normalizing\n";
    Mat3 R = quat_to_rotation(quat);
    Mat3 M = R * scale.asDiagonal();
    return M * M.transpose();
}

double gaussian_value(const DecodedGaussian& g, const Vec3& x) {
    Mat3 M = g.rotation * g.scale.asDiagonal();
    Mat3 cov = M * M.transpose();
    Vec3 d = x - g.mean;
    return std::exp(-0.5 * d.dot(cov.llt().solve(d)));
}

int smallest_scale_axis(const Vec3& scale) {
    int k = 0;
    for (int a = 1; a < 3; ++a)
        if (scale(a) < scale(k)) k = a;
    return k;
}

Vec3 normal_of(const DecodedGaussian& g, const Vec3* camera_pos) {
    Vec3 n = g.rotation.col(smallest_scale_axis(g.scale));
    if (camera_pos && n.dot(*camera_pos - g.mean) < 0) n = -n;
    return n;
}

void accumulate_stats(GaussianSet& set, const std::vector<double>& per_primitive_grad,
                      const std::vector<double>& per_primitive_opacity) {
    if (per_primitive_grad.size() != set.size() || per_primitive_opacity.size() != set.size())
        throw std::invalid_argument("accumulate_stats: length mismatch");
    set.resize_stats();
    for (size_t i = 0; i < set.size(); ++i) {
        DensityStats& s = set.stats[i];
        s.count += 1;
        s.grad_accum += (per_primitive_grad[i] - s.grad_accum) / s.count;
        s.opacity_accum += (per_primitive_opacity[i] - s.opacity_accum) / s.count;
    }
}

GaussianSet init_random_in_box(int count, const Vec3& box_min, const Vec3& box_max,
                               double scale_init, std::mt19937_64& rng) {
    GaussianSet set;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        GaussianPrimitive g;
        for (int a = 0; a < 3; ++a)
            g.mean(a) = box_min(a) + uni(rng) * (box_max(a) - box_min(a));
        g.log_scale = Vec3::Constant(std::log(scale_init));
        Vec4 q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        g.quat = q / q.norm();
        g.opacity_logit = logit(0.1);
        for (int a = 0; a < 3; ++a) g.color_logit(a) = logit(0.5 + 0.1 * (uni(rng) - 0.5));
        set.primitives.push_back(g);
    }
    set.resize_stats();
    return set;
}

GaussianSet init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                             double jitter, double scale_init, std::mt19937_64& rng) {
    if (colors.size() != points.size())
        throw std::invalid_argument("init_from_points: point/color length mismatch");
    GaussianSet set;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (size_t i = 0; i < points.size(); ++i) {
        GaussianPrimitive g;
        g.mean = points[i] + jitter * Vec3(gauss(rng), gauss(rng), gauss(rng));
        g.log_scale = Vec3::Constant(std::log(scale_init));
        Vec4 q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        g.quat = q / q.norm();
        g.opacity_logit = logit(0.1);
        for (int a = 0; a < 3; ++a)
            g.color_logit(a) = logit(std::clamp(colors[i](a), 0.01, 0.99));
        set.primitives.push_back(g);
    }
    set.resize_stats();
    return set;
}

void save_ply(const std::string& path, const GaussianSet& set) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_ply: cannot open " + path);
    f.precision(17);
    f << "ply\nformat ascii 1.0\nelement vertex " << set.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double log_scale_x\nproperty double log_scale_y\nproperty double log_scale_z\n"
      << "property double quat_w\nproperty double quat_x\nproperty double quat_y\nproperty double quat_z\n"
      << "property double opacity_logit\n"
      << "property double red\nproperty double green\nproperty double blue\n"
      << "end_header\n";
    for (const GaussianPrimitive& g : set.primitives) {
        DecodedGaussian d = decode(g);
        f << g.mean(0) << " " << g.mean(1) << " " << g.mean(2) << " " << g.log_scale(0)
          << " " << g.log_scale(1) << " " << g.log_scale(2) << " " << g.quat(0) << " "
          << g.quat(1) << " " << g.quat(2) << " " << g.quat(3) << " " << g.opacity_logit
          << " " << d.color(0) << " " << d.color(1) << " " << d.color(2) << "\n";
    }
}

GaussianSet load_ply(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_ply: cannot open " + path);
    std::string line;
    size_t n = 0;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "element") {
            ss >> tok >> n;
        } else if (tok == "end_header") {
            break;
        }
    }
    GaussianSet set;
    for (size_t i = 0; i < n; ++i) {
        GaussianPrimitive g;
        Vec3 rgb;
        f >> g.mean(0) >> g.mean(1) >> g.mean(2) >> g.log_scale(0) >> g.log_scale(1) >>
            g.log_scale(2) >> g.quat(0) >> g.quat(1) >> g.quat(2) >> g.quat(3) >>
            g.opacity_logit >> rgb(0) >> rgb(1) >> rgb(2);
        for (int a = 0; a < 3; ++a) g.color_logit(a) = logit(std::clamp(rgb(a), 1e-6, 1 - 1e-6));
        set.primitives.push_back(g);
    }
    if (!f) throw std::runtime_error("load_ply: truncated " + path);
    set.resize_stats();
    return set;
}

namespace {
void wr_d(std::ostream& os, const double* p, size_t n) {
    os.write(reinterpret_cast<const char*>(p), n * sizeof(double));
}
void rd_d(std::istream& is, double* p, size_t n) {
    is.read(reinterpret_cast<char*>(p), n * sizeof(double));
}
}  // namespace

void save_gaussians(std::ostream& os, const GaussianSet& set) {
    uint64_t n = set.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const GaussianPrimitive& g : set.primitives) {
        wr_d(os, g.mean.data(), 3);
        wr_d(os, g.log_scale.data(), 3);
        wr_d(os, g.quat.data(), 4);
        wr_d(os, &g.opacity_logit, 1);
        wr_d(os, g.color_logit.data(), 3);
    }
    for (const DensityStats& s : set.stats) {
        wr_d(os, &s.grad_accum, 1);
        wr_d(os, &s.opacity_accum, 1);
        int32_t c = s.count;
        os.write(reinterpret_cast<const char*>(&c), sizeof(c));
    }
}

GaussianSet load_gaussians(std::istream& is) {
    uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    GaussianSet set;
    set.primitives.resize(n);
    set.stats.resize(n);
    for (GaussianPrimitive& g : set.primitives) {
        rd_d(is, g.mean.data(), 3);
        rd_d(is, g.log_scale.data(), 3);
        rd_d(is, g.quat.data(), 4);
        rd_d(is, &g.opacity_logit, 1);
        rd_d(is, g.color_logit.data(), 3);
    }
    for (DensityStats& s : set.stats) {
        rd_d(is, &s.grad_accum, 1);
        rd_d(is, &s.opacity_accum, 1);
        int32_t c = 0;
        is.read(reinterpret_cast<char*>(&c), sizeof(c));
        s.count = c;
    }
    if (!is) throw std::runtime_error("load_gaussians: truncated stream");
    return set;
}

}  // namespace gsdf
