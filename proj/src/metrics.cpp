#include "gsdf/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace gsdf {

namespace {

// Uniform hash grid over the bounding box of the points, cell size tuned to
// the average point density.
class PointGrid {
 public:
    explicit PointGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        if (pts.empty()) throw std::invalid_argument("PointGrid: empty point set");
        lo_ = hi_ = pts[0];
        for (const Vec3& p : pts) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        double extent = std::max((hi_ - lo_).maxCoeff(), 1e-9);
        double target_cells = std::cbrt(double(pts.size()));
        cell_ = std::max(extent / std::max(target_cells, 1.0), 1e-9);
        for (size_t i = 0; i < pts.size(); ++i) cells_[key_of(pts[i])].push_back(int(i));
    }

    double nearest_distance(const Vec3& q) const {
        // Expanding ring search. A point in a cell at Chebyshev ring r is at
        // least (r-1)*cell away, so once (ring-1)*cell exceeds the best
        // distance found so far no further ring can improve it.
        int cx, cy, cz;
        coords(q, cx, cy, cz);
        int span = 2 + int((hi_ - lo_).maxCoeff() / cell_);
        // Queries well outside the bounding box would need huge ring indices
        // (and the ring-distance bound below assumes the query sits in its
        // own cell), so scan directly instead.
        if (cx < -2 || cx > span + 2 || cy < -2 || cy > span + 2 || cz < -2 ||
            cz > span + 2) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& p : pts_) best = std::min(best, (p - q).norm());
            return best;
        }
        double best = std::numeric_limits<double>::infinity();
        int max_ring = span + 4;
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (std::isfinite(best) && double(ring - 1) * cell_ > best) break;
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue;
                        auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
                        if (it == cells_.end()) continue;
                        for (int i : it->second)
                            best = std::min(best, (pts_[i] - q).norm());
                    }
        }
        return best;
    }

 private:
    uint64_t key_of(const Vec3& p) const {
        int x, y, z;
        coords(p, x, y, z);
        return pack(x, y, z);
    }
    void coords(const Vec3& p, int& x, int& y, int& z) const {
        x = int(std::floor((p.x() - lo_.x()) / cell_));
        y = int(std::floor((p.y() - lo_.y()) / cell_));
        z = int(std::floor((p.z() - lo_.z()) / cell_));
    }
    static uint64_t pack(int x, int y, int z) {
        auto u = [](int v) { return uint64_t(uint32_t(v + (1 << 20))) & 0x1FFFFF; };
        return (u(x) << 42) | (u(y) << 21) | u(z);
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_, hi_;
    double cell_ = 1.0;
    std::unordered_map<uint64_t, std::vector<int>> cells_;
};

double one_sided(const std::vector<Vec3>& from, const PointGrid& to_grid) {
    double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
    for (long i = 0; i < long(from.size()); ++i)
        sum += to_grid.nearest_distance(from[i]);
    return sum / double(from.size());
}

}  // namespace

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("chamfer_distance: empty point set");
    PointGrid ga(a), gb(b);
    return 0.5 * (one_sided(a, gb) + one_sided(b, ga));
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    if (a.data.empty()) throw std::invalid_argument("mse: empty image");
    double sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return sum / double(a.data.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double m = mse(a, b);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

}  // namespace gsdf
