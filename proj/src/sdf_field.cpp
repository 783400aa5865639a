#include "gsdf/sdf_field.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gsdf {

namespace {

constexpr uint32_t kPrimeY = 2654435761u;
constexpr uint32_t kPrimeZ = 805459861u;

inline double softplus(double x) {
    if (x > 20.0) return x;
    if (x < -20.0) return std::exp(x);
    return std::log1p(std::exp(x));
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Array-expression forms so Eigen can use its vectorized exp/log1p kernels.
inline MatX softplus_mat(const MatX& z) {
    return (z.array().max(0.0) + (-z.array().abs()).exp().log1p()).matrix();
}
inline MatX sigmoid_mat(const MatX& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

void check_config(const SdfFieldConfig& cfg) {
    const HashGridConfig& g = cfg.grid;
    if (g.levels < 1) throw std::invalid_argument("hash grid: levels must be >= 1");
    if (g.base_resolution < 1 || g.base_resolution > g.max_resolution)
        throw std::invalid_argument("hash grid: need 1 <= base_resolution <= max_resolution");
    if (g.feature_dim < 1) throw std::invalid_argument("hash grid: feature_dim must be >= 1");
    if (g.table_size == 0 || (g.table_size & (g.table_size - 1)) != 0)
        throw std::invalid_argument("hash grid: table_size must be a power of two");
    if (cfg.hidden_width < 1 || cfg.geo_feature_dim < 1)
        throw std::invalid_argument("sdf field: bad head dimensions");
    if ((cfg.domain_max - cfg.domain_min).minCoeff() <= 0)
        throw std::invalid_argument("sdf field: empty domain box");
}

}  // namespace

double HashGridConfig::growth_factor() const {
    if (levels <= 1) return 1.0;
    return std::exp(std::log(double(max_resolution) / base_resolution) / (levels - 1));
}

int HashGridConfig::resolution(int level) const {
    double b = growth_factor();
    return int(std::lround(base_resolution * std::pow(b, level)));
}

int activate_levels(const ProgressiveSchedule& sched, int levels, long iteration) {
    if (iteration < 0) throw std::invalid_argument("activate_levels: negative iteration");
    long n = sched.initial_active_levels + iteration / sched.step_iterations;
    return int(std::min<long>(levels, n));
}

Vec3 tangent_perturb(const Vec3& x, const Vec3& normal, double epsilon,
                     std::mt19937_64& rng) {
    if (epsilon <= 0) throw std::invalid_argument("tangent_perturb: epsilon must be > 0");
    double nn = normal.norm();
    if (nn < 1e-12) throw std::invalid_argument("tangent_perturb: zero normal");
    if (std::abs(nn - 1.0) > 1e-4)
        throw std::invalid_argument("tangent_perturb: normal must be unit length");
    Vec3 n = normal / nn;
    Vec3 a = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    Vec3 t1 = n.cross(a).normalized();
    Vec3 t2 = n.cross(t1);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
    double th = uni(rng);
    return x + epsilon * (std::cos(th) * t1 + std::sin(th) * t2);
}

SdfField::SdfField(const SdfFieldConfig& cfg, uint64_t seed) : cfg_(cfg) {
    check_config(cfg);
    const HashGridConfig& g = cfg.grid;
    level_offset_.resize(g.levels);
    level_entries_.resize(g.levels);
    level_dense_.resize(g.levels);
    uint64_t off = 0;
    for (int l = 0; l < g.levels; ++l) {
        uint64_t verts = uint64_t(g.resolution(l)) + 1;
        uint64_t dense = verts * verts * verts;
        bool is_dense = dense <= g.table_size;
        level_dense_[l] = is_dense;
        level_entries_[l] = uint32_t(is_dense ? dense : g.table_size);
        level_offset_[l] = uint32_t(off);
        off += uint64_t(level_entries_[l]) * g.feature_dim;
    }
    grid_size_ = off;
    mlp_size_ = head_size(sdf_dims()) + head_size(color_dims());
    params.assign(grid_size_ + mlp_size_ + 1, 0.0);
    grads.assign(params.size(), 0.0);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> feat(-1e-4, 1e-4);
    for (size_t i = 0; i < grid_size_; ++i) params[i] = feat(rng);

    auto init_head = [&](const Dims& d, size_t base) {
        std::normal_distribution<double> n0(0.0, std::sqrt(2.0 / (d.in0 + d.h)));
        std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / (d.h + d.h)));
        std::normal_distribution<double> n2(0.0, std::sqrt(2.0 / (d.h + d.out)));
        size_t p = base;
        for (int i = 0; i < d.h * d.in0; ++i) params[p++] = n0(rng);
        p += d.h;  // b0 = 0
        for (int i = 0; i < d.h * d.h; ++i) params[p++] = n1(rng);
        p += d.h;
        for (int i = 0; i < d.out * d.h; ++i) params[p++] = n2(rng);
    };
    init_head(sdf_dims(), grid_size_);
    init_head(color_dims(), grid_size_ + head_size(sdf_dims()));
    params[sharpness_index()] = std::log(cfg.init_sharpness);
    active_levels = g.levels;
}

SdfField::Dims SdfField::sdf_dims() const {
    return {in_dim(), cfg_.hidden_width, 1 + cfg_.geo_feature_dim};
}
SdfField::Dims SdfField::color_dims() const {
    return {cfg_.geo_feature_dim + 6, cfg_.hidden_width, 3};
}
size_t SdfField::head_size(const Dims& d) const {
    return size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h + d.h + size_t(d.out) * d.h + d.out;
}

SdfField::MlpView SdfField::sdf_head(AlignedBuffer& buf) const {
    Dims d = sdf_dims();
    double* p = buf.data() + grid_size_;
    return MlpView{
        Eigen::Map<MatX>(p, d.h, d.in0),
        Eigen::Map<MatX>(p + size_t(d.h) * d.in0 + d.h, d.h, d.h),
        Eigen::Map<MatX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h + d.h, d.out, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h + d.h +
                             size_t(d.out) * d.h,
                         d.out)};
}

SdfField::MlpView SdfField::color_head(AlignedBuffer& buf) const {
    Dims d = color_dims();
    double* p = buf.data() + grid_size_ + head_size(sdf_dims());
    return MlpView{
        Eigen::Map<MatX>(p, d.h, d.in0),
        Eigen::Map<MatX>(p + size_t(d.h) * d.in0 + d.h, d.h, d.h),
        Eigen::Map<MatX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h + d.h, d.out, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h, d.h),
        Eigen::Map<VecX>(p + size_t(d.h) * d.in0 + d.h + size_t(d.h) * d.h + d.h +
                             size_t(d.out) * d.h,
                         d.out)};
}

void SdfField::zero_grad() { std::fill(grads.begin(), grads.end(), 0.0); }

double SdfField::cell_size(int level, int axis) const {
    return (cfg_.domain_max[axis] - cfg_.domain_min[axis]) / cfg_.grid.resolution(level);
}

uint32_t SdfField::entry_index(int level, int ix, int iy, int iz) const {
    if (level_dense_[level]) {
        uint32_t v = uint32_t(cfg_.grid.resolution(level)) + 1;
        return (uint32_t(ix) * v + uint32_t(iy)) * v + uint32_t(iz);
    }
    uint32_t h = uint32_t(ix) ^ (uint32_t(iy) * kPrimeY) ^ (uint32_t(iz) * kPrimeZ);
    return h & (cfg_.grid.table_size - 1);
}

double SdfField::sphere_prior_value(const Vec3& x, Vec3* grad) const {
    if (!cfg_.sphere_prior) {
        if (grad) grad->setZero();
        return 0.0;
    }
    double half_extent = 0.5 * (cfg_.domain_max - cfg_.domain_min).maxCoeff();
    double r = cfg_.sphere_radius_frac * half_extent;
    Vec3 c = 0.5 * (cfg_.domain_max + cfg_.domain_min);
    Vec3 d = x - c;
    double len = d.norm();
    if (grad) *grad = len > 1e-12 ? Vec3(d / len) : Vec3::Zero();
    return len - r;
}

void SdfField::encode_point(const Vec3& x, int i, BatchEval& ctx) const {
    const HashGridConfig& g = cfg_.grid;
    const int F = g.feature_dim;
    Vec3 xc = x.cwiseMax(cfg_.domain_min).cwiseMin(cfg_.domain_max);
    ctx.X0(0, i) = xc.x();
    ctx.X0(1, i) = xc.y();
    ctx.X0(2, i) = xc.z();
    const int L = ctx.ctx_levels;
    for (int l = 0; l < L; ++l) {
        const int N = g.resolution(l);
        double h[3], u[3], fr[3];
        int base_i[3];
        for (int a = 0; a < 3; ++a) {
            h[a] = (cfg_.domain_max[a] - cfg_.domain_min[a]) / N;
            u[a] = (xc[a] - cfg_.domain_min[a]) / h[a];
            base_i[a] = std::min(int(std::floor(u[a])), N - 1);
            if (base_i[a] < 0) base_i[a] = 0;
            fr[a] = u[a] - base_i[a];
        }
        size_t slot = (size_t(i) * L + l) * 8;
        for (int c = 0; c < 8; ++c) {
            int bx = (c >> 2) & 1, by = (c >> 1) & 1, bz = c & 1;
            double wx = bx ? fr[0] : 1.0 - fr[0];
            double wy = by ? fr[1] : 1.0 - fr[1];
            double wz = bz ? fr[2] : 1.0 - fr[2];
            double w = wx * wy * wz;
            uint32_t e = entry_index(l, base_i[0] + bx, base_i[1] + by, base_i[2] + bz);
            uint32_t base = level_offset_[l] + e * F;
            ctx.corner[slot + c] = base;
            ctx.weight[slot + c] = w;
            ctx.dweight[(slot + c) * 3 + 0] = (bx ? 1.0 : -1.0) / h[0] * wy * wz;
            ctx.dweight[(slot + c) * 3 + 1] = (by ? 1.0 : -1.0) / h[1] * wx * wz;
            ctx.dweight[(slot + c) * 3 + 2] = (bz ? 1.0 : -1.0) / h[2] * wx * wy;
            for (int d = 0; d < F; ++d) {
                double f = params[base + d];
                int row = 3 + l * F + d;
                ctx.X0(row, i) += w * f;
                for (int a = 0; a < 3; ++a)
                    ctx.X0(row, (a + 1) * ctx.n + i) +=
                        ctx.dweight[(slot + c) * 3 + a] * f;
            }
        }
    }
    // inactive levels stay exactly zero (masking keeps the output width fixed)
}

void SdfField::eval(const std::vector<Vec3>& xs, const Vec3* dir, BatchEval& out) const {
    const int n = int(xs.size());
    for (const Vec3& x : xs)
        if (!x.allFinite()) throw std::invalid_argument("sdf eval: non-finite input point");
    out.n = n;
    out.has_color = dir != nullptr;
    if (dir) out.dir = *dir;
    out.ctx_levels = std::min(active_levels, cfg_.grid.levels);
    const int L = out.ctx_levels;

    out.corner.assign(size_t(n) * L * 8, 0);
    out.weight.assign(size_t(n) * L * 8, 0.0);
    out.dweight.assign(size_t(n) * L * 24, 0.0);

    out.X0.setZero(in_dim(), 4 * n);
    for (int i = 0; i < n; ++i) {
        encode_point(xs[i], i, out);
        for (int a = 0; a < 3; ++a) out.X0(a, (a + 1) * n + i) = 1.0;
    }

    auto& self = const_cast<SdfField&>(*this);
    MlpView sh = sdf_head(self.params);
    const int h = int(sh.W0.rows());
    out.Z0.noalias() = sh.W0 * out.X0;
    out.Z0.leftCols(n).colwise() += sh.b0;
    out.sig0 = sigmoid_mat(out.Z0.leftCols(n));
    out.A0.resize(h, 4 * n);
    out.A0.leftCols(n) = softplus_mat(out.Z0.leftCols(n));
    for (int a = 0; a < 3; ++a)
        out.A0.middleCols((a + 1) * n, n) =
            out.sig0.cwiseProduct(out.Z0.middleCols((a + 1) * n, n));
    out.Z1.noalias() = sh.W1 * out.A0;
    out.Z1.leftCols(n).colwise() += sh.b1;
    out.sig1 = sigmoid_mat(out.Z1.leftCols(n));
    out.A1.resize(h, 4 * n);
    out.A1.leftCols(n) = softplus_mat(out.Z1.leftCols(n));
    for (int a = 0; a < 3; ++a)
        out.A1.middleCols((a + 1) * n, n) =
            out.sig1.cwiseProduct(out.Z1.middleCols((a + 1) * n, n));
    out.Y.noalias() = sh.W2 * out.A1;
    out.Y.leftCols(n).colwise() += sh.b2;

    out.sdf.resize(n);
    out.grad.resize(3, n);
    for (int i = 0; i < n; ++i) {
        Vec3 pg;
        double pv = sphere_prior_value(xs[i], &pg);
        out.sdf(i) = out.Y(0, i) + pv;
        for (int a = 0; a < 3; ++a) out.grad(a, i) = out.Y(0, (a + 1) * n + i) + pg[a];
    }

    if (out.has_color) {
        const int geo = cfg_.geo_feature_dim;
        out.cx.resize(geo + 6, n);
        out.cx.topRows(geo) = out.Y.block(1, 0, geo, n);
        for (int i = 0; i < n; ++i) {
            out.cx.block(geo, i, 3, 1) = out.dir;
            out.cx.block(geo + 3, i, 3, 1) = out.grad.col(i);
        }
        MlpView ch = color_head(self.params);
        out.cz0 = (ch.W0 * out.cx).colwise() + ch.b0;
        out.ca0 = softplus_mat(out.cz0);
        out.cz1 = (ch.W1 * out.ca0).colwise() + ch.b1;
        out.ca1 = softplus_mat(out.cz1);
        out.cpre = (ch.W2 * out.ca1).colwise() + ch.b2;
        out.color = sigmoid_mat(out.cpre);
    } else {
        out.color.resize(3, 0);
    }
}

void SdfField::backward(const BatchEval& ctx, const VecX& sdf_bar, const Mat3X& grad_bar,
                        const Mat3X& color_bar, AlignedBuffer& grad_out) const {
    const int n = ctx.n;
    const int geo = cfg_.geo_feature_dim;
    if (grad_out.size() != params.size())
        throw std::invalid_argument("sdf backward: gradient buffer size mismatch");
    auto& self = const_cast<SdfField&>(*this);

    Mat3X gbar = grad_bar.cols() == n ? Mat3X(grad_bar) : Mat3X(Mat3X::Zero(3, n));
    MatX geo_bar = MatX::Zero(geo, n);

    if (ctx.has_color && color_bar.cols() == n) {
        MlpView ch = color_head(self.params);
        MlpView chg = color_head(grad_out);
        MatX pre_bar = color_bar.cwiseProduct(ctx.color.cwiseProduct(
            (ctx.color.array() * -1.0 + 1.0).matrix()));
        chg.W2 += pre_bar * ctx.ca1.transpose();
        chg.b2 += pre_bar.rowwise().sum();
        MatX ca1_bar = ch.W2.transpose() * pre_bar;
        MatX cz1_bar = sigmoid_mat(ctx.cz1).cwiseProduct(ca1_bar);
        chg.W1 += cz1_bar * ctx.ca0.transpose();
        chg.b1 += cz1_bar.rowwise().sum();
        MatX ca0_bar = ch.W1.transpose() * cz1_bar;
        MatX cz0_bar = sigmoid_mat(ctx.cz0).cwiseProduct(ca0_bar);
        chg.W0 += cz0_bar * ctx.cx.transpose();
        chg.b0 += cz0_bar.rowwise().sum();
        MatX cx_bar = ch.W0.transpose() * cz0_bar;
        geo_bar += cx_bar.topRows(geo);
        gbar += cx_bar.bottomRows(3);
    }

    MlpView sh = sdf_head(self.params);
    MlpView shg = sdf_head(grad_out);

    // Bars share the fused [value | t0 | t1 | t2] column layout of the
    // forward activations, so every weight gradient and every transpose
    // propagation is a single GEMM.
    MatX Y_bar = MatX::Zero(1 + geo, 4 * n);
    Y_bar.row(0).segment(0, n) = sdf_bar.transpose();
    Y_bar.block(1, 0, geo, n) = geo_bar;
    for (int a = 0; a < 3; ++a)
        Y_bar.row(0).segment((a + 1) * n, n) = gbar.row(a);

    shg.W2 += Y_bar * ctx.A1.transpose();
    shg.b2 += Y_bar.leftCols(n).rowwise().sum();
    MatX A1_bar = sh.W2.transpose() * Y_bar;

    const int h = int(sh.W0.rows());
    const MatX& sig1 = ctx.sig1;
    MatX dsig1 = sig1.cwiseProduct((sig1.array() * -1.0 + 1.0).matrix());
    MatX Z1_bar(h, 4 * n);
    Z1_bar.leftCols(n) = sig1.cwiseProduct(A1_bar.leftCols(n));
    for (int a = 0; a < 3; ++a) {
        Z1_bar.leftCols(n) += dsig1.cwiseProduct(ctx.Z1.middleCols((a + 1) * n, n)
                                                     .cwiseProduct(A1_bar.middleCols((a + 1) * n, n)));
        Z1_bar.middleCols((a + 1) * n, n) =
            sig1.cwiseProduct(A1_bar.middleCols((a + 1) * n, n));
    }

    shg.W1 += Z1_bar * ctx.A0.transpose();
    shg.b1 += Z1_bar.leftCols(n).rowwise().sum();
    MatX A0_bar = sh.W1.transpose() * Z1_bar;

    const MatX& sig0 = ctx.sig0;
    MatX dsig0 = sig0.cwiseProduct((sig0.array() * -1.0 + 1.0).matrix());
    MatX Z0_bar(h, 4 * n);
    Z0_bar.leftCols(n) = sig0.cwiseProduct(A0_bar.leftCols(n));
    for (int a = 0; a < 3; ++a) {
        Z0_bar.leftCols(n) += dsig0.cwiseProduct(ctx.Z0.middleCols((a + 1) * n, n)
                                                     .cwiseProduct(A0_bar.middleCols((a + 1) * n, n)));
        Z0_bar.middleCols((a + 1) * n, n) =
            sig0.cwiseProduct(A0_bar.middleCols((a + 1) * n, n));
    }

    shg.W0 += Z0_bar * ctx.X0.transpose();
    shg.b0 += Z0_bar.leftCols(n).rowwise().sum();
    MatX X0_bar = sh.W0.transpose() * Z0_bar;

    // scatter into grid features
    const int F = cfg_.grid.feature_dim;
    const int L = ctx.ctx_levels;
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < L; ++l) {
            size_t slot = (size_t(i) * L + l) * 8;
            for (int c = 0; c < 8; ++c) {
                uint32_t base = ctx.corner[slot + c];
                double w = ctx.weight[slot + c];
                const double* dw = &ctx.dweight[(slot + c) * 3];
                for (int d = 0; d < F; ++d) {
                    int row = 3 + l * F + d;
                    double acc = w * X0_bar(row, i);
                    for (int a = 0; a < 3; ++a)
                        acc += dw[a] * X0_bar(row, (a + 1) * n + i);
                    grad_out[base + d] += acc;
                }
            }
        }
}

VecX SdfField::encode(const Vec3& x) const {
    BatchEval ctx;
    eval({x}, nullptr, ctx);
    return ctx.X0.col(0).tail(enc_dim());
}

double SdfField::sdf_value(const Vec3& x) const {
    BatchEval ctx;
    eval({x}, nullptr, ctx);
    return ctx.sdf(0);
}

Vec3 SdfField::sdf_gradient(const Vec3& x) const {
    BatchEval ctx;
    eval({x}, nullptr, ctx);
    return ctx.grad.col(0);
}

namespace {
template <typename T>
void wr(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void rd(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void SdfField::save(std::ostream& os) const {
    const char magic[8] = {'g', 's', 'd', 'f', 'f', 'l', 'd', '1'};
    os.write(magic, 8);
    wr(os, cfg_.grid.levels);
    wr(os, cfg_.grid.base_resolution);
    wr(os, cfg_.grid.max_resolution);
    wr(os, cfg_.grid.feature_dim);
    wr(os, cfg_.grid.table_size);
    wr(os, cfg_.hidden_width);
    wr(os, cfg_.geo_feature_dim);
    wr(os, cfg_.sphere_prior);
    wr(os, cfg_.sphere_radius_frac);
    wr(os, cfg_.init_sharpness);
    for (int a = 0; a < 3; ++a) wr(os, cfg_.domain_min[a]);
    for (int a = 0; a < 3; ++a) wr(os, cfg_.domain_max[a]);
    wr(os, active_levels);
    uint64_t np = params.size();
    wr(os, np);
    os.write(reinterpret_cast<const char*>(params.data()), np * sizeof(double));
}

SdfField SdfField::load(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "gsdffld1")
        throw std::runtime_error("SdfField::load: bad magic");
    SdfFieldConfig cfg;
    rd(is, cfg.grid.levels);
    rd(is, cfg.grid.base_resolution);
    rd(is, cfg.grid.max_resolution);
    rd(is, cfg.grid.feature_dim);
    rd(is, cfg.grid.table_size);
    rd(is, cfg.hidden_width);
    rd(is, cfg.geo_feature_dim);
    rd(is, cfg.sphere_prior);
    rd(is, cfg.sphere_radius_frac);
    rd(is, cfg.init_sharpness);
    for (int a = 0; a < 3; ++a) rd(is, cfg.domain_min[a]);
    for (int a = 0; a < 3; ++a) rd(is, cfg.domain_max[a]);
    SdfField f(cfg, 0);
    rd(is, f.active_levels);
    uint64_t np = 0;
    rd(is, np);
    if (np != f.params.size()) throw std::runtime_error("SdfField::load: size mismatch");
    is.read(reinterpret_cast<char*>(f.params.data()), np * sizeof(double));
    if (!is) throw std::runtime_error("SdfField::load: truncated stream");
    return f;
}

void SdfField::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("SdfField::save: cannot open " + path);
    save(f);
}

SdfField SdfField::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("SdfField::load: cannot open " + path);
    return load(f);
}

}  // namespace gsdf
