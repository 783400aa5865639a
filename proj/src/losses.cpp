#include "gsdf/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gsdf {

namespace {
constexpr int kWin = 11;
constexpr double kC1 = 1e-4;  // (0.01 * L)^2, L = 1
constexpr double kC2 = 9e-4;  // (0.03 * L)^2

const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        std::vector<double> k(kWin);
        double sum = 0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - (kWin - 1) / 2.0;
            k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += k[i];
        }
        for (double& v : k) v /= sum;
        std::vector<double> w2(kWin * kWin);
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) w2[y * kWin + x] = k[y] * k[x];
        return w2;
    }();
    return w;
}

void check_shapes(const ImageBuffer& a, const ImageBuffer& b, const char* who) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": shape mismatch");
}
}  // namespace

double l1_loss(const ImageBuffer& a, const ImageBuffer& b) {
    check_shapes(a, b, "l1_loss");
    double sum = 0;
    for (size_t i = 0; i < a.data.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
    return sum / double(a.data.size());
}

void l1_loss_backward(const ImageBuffer& a, const ImageBuffer& b, double weight,
                      ImageBuffer& grad_a) {
    check_shapes(a, b, "l1_loss_backward");
    if (!grad_a.same_shape(a)) grad_a = ImageBuffer(a.width, a.height, a.channels);
    double scale = weight / double(a.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        grad_a.data[i] += d > 0 ? scale : (d < 0 ? -scale : 0.0);
    }
}

namespace {
struct SsimLocals {
    double mu_a, mu_b, sa, sb, sab;  // window means of a, b, a^2, b^2, ab
};

template <typename Fn>
void ssim_scan(const ImageBuffer& a, const ImageBuffer& b, Fn&& fn) {
    const std::vector<double>& w = ssim_window();
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y + kWin <= a.height; ++y)
            for (int x = 0; x + kWin <= a.width; ++x) {
                SsimLocals l{0, 0, 0, 0, 0};
                for (int dy = 0; dy < kWin; ++dy)
                    for (int dx = 0; dx < kWin; ++dx) {
                        double wv = w[dy * kWin + dx];
                        double av = a.at(x + dx, y + dy, c);
                        double bv = b.at(x + dx, y + dy, c);
                        l.mu_a += wv * av;
                        l.mu_b += wv * bv;
                        l.sa += wv * av * av;
                        l.sb += wv * bv * bv;
                        l.sab += wv * av * bv;
                    }
                fn(c, x, y, l);
            }
}
}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    check_shapes(a, b, "ssim");
    if (a.width < kWin || a.height < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    double sum = 0;
    long count = 0;
    ssim_scan(a, b, [&](int, int, int, const SsimLocals& l) {
        double va = l.sa - l.mu_a * l.mu_a;
        double vb = l.sb - l.mu_b * l.mu_b;
        double vab = l.sab - l.mu_a * l.mu_b;
        double A1 = 2 * l.mu_a * l.mu_b + kC1, A2 = 2 * vab + kC2;
        double B1 = l.mu_a * l.mu_a + l.mu_b * l.mu_b + kC1, B2 = va + vb + kC2;
        sum += (A1 * A2) / (B1 * B2);
        count += 1;
    });
    return sum / double(count);
}

void ssim_backward(const ImageBuffer& a, const ImageBuffer& b, double weight,
                   ImageBuffer& grad_a) {
    check_shapes(a, b, "ssim_backward");
    if (a.width < kWin || a.height < kWin)
        throw std::invalid_argument("ssim_backward: image smaller than the 11x11 window");
    if (!grad_a.same_shape(a)) grad_a = ImageBuffer(a.width, a.height, a.channels);
    long count = long(a.channels) * (a.height - kWin + 1) * (a.width - kWin + 1);
    const double upstream = weight / double(count);
    const std::vector<double>& w = ssim_window();
    ssim_scan(a, b, [&](int c, int x, int y, const SsimLocals& l) {
        double va = l.sa - l.mu_a * l.mu_a;
        double vb = l.sb - l.mu_b * l.mu_b;
        double vab = l.sab - l.mu_a * l.mu_b;
        double A1 = 2 * l.mu_a * l.mu_b + kC1, A2 = 2 * vab + kC2;
        double B1 = l.mu_a * l.mu_a + l.mu_b * l.mu_b + kC1, B2 = va + vb + kC2;
        double S = (A1 * A2) / (B1 * B2);
        double dS_dA1 = A2 / (B1 * B2), dS_dA2 = A1 / (B1 * B2);
        double dS_dB1 = -S / B1, dS_dB2 = -S / B2;
        // chain through mu_a, Sa=G*(a^2), Sab=G*(ab)
        double mu_a_bar = 2 * l.mu_b * dS_dA1 - 2 * l.mu_b * dS_dA2 + 2 * l.mu_a * dS_dB1 -
                          2 * l.mu_a * dS_dB2;
        double sa_bar = dS_dB2;
        double sab_bar = 2 * dS_dA2;
        for (int dy = 0; dy < kWin; ++dy)
            for (int dx = 0; dx < kWin; ++dx) {
                double wv = w[dy * kWin + dx];
                double av = a.at(x + dx, y + dy, c);
                double bv = b.at(x + dx, y + dy, c);
                grad_a.at(x + dx, y + dy, c) +=
                    upstream * wv * (mu_a_bar + 2 * av * sa_bar + bv * sab_bar);
            }
    });
}

double volume_regularization(const GaussianSet& set) {
    if (set.size() == 0) return 0.0;
    double sum = 0;
    for (const GaussianPrimitive& g : set.primitives) {
        DecodedGaussian d = decode(g);
        sum += d.scale.prod();
    }
    return sum / double(set.size());
}

void volume_regularization_backward(const GaussianSet& set, double weight,
                                    GaussianGrads& grads) {
    if (set.size() == 0) return;
    if (grads.mean.size() != set.size()) grads.resize(set.size());
    double scale = weight / double(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        DecodedGaussian d = decode(set.primitives[i]);
        double prod = d.scale.prod();
        for (int k = 0; k < 3; ++k)
            if (set.primitives[i].log_scale(k) > kLogScaleFloor)
                grads.log_scale[i](k) += scale * prod;  // d(prod)/d(log s_k) = prod
    }
}

double eikonal_loss(const SdfField& field, const std::vector<Vec3>& points, double weight,
                    AlignedBuffer* grad_out) {
    if (points.empty()) return 0.0;
    SdfField::BatchEval ev;
    field.eval(points, nullptr, ev);
    const int n = ev.n;
    double loss = 0;
    Mat3X grad_bar = Mat3X::Zero(3, n);
    for (int i = 0; i < n; ++i) {
        double gn = ev.grad.col(i).norm();
        double r = gn - 1.0;
        loss += r * r;
        if (grad_out && gn > 1e-12)
            grad_bar.col(i) = (weight * 2.0 * r / double(n)) * ev.grad.col(i) / gn;
    }
    if (grad_out)
        field.backward(ev, VecX::Zero(n), grad_bar, Mat3X(), *grad_out);
    return loss / double(n);
}

namespace {

CurvatureResult curvature_core(const SdfField& field, const std::vector<Vec3>& points,
                               SdfField::BatchEval& ev0, const std::vector<Vec3>& perturbed,
                               const std::vector<int>& kept, double weight,
                               AlignedBuffer* grad_out);

}  // namespace

CurvatureResult curvature_loss(const SdfField& field, const std::vector<Vec3>& points,
                               double epsilon, std::mt19937_64& rng, double weight,
                               AlignedBuffer* grad_out) {
    if (epsilon <= 0) throw std::invalid_argument("curvature_loss: epsilon must be > 0");
    CurvatureResult res;
    if (points.empty()) return res;

    SdfField::BatchEval ev0;
    field.eval(points, nullptr, ev0);
    std::vector<Vec3> perturbed;
    std::vector<int> kept;
    for (size_t i = 0; i < points.size(); ++i) {
        Vec3 g = ev0.grad.col(int(i));
        double gn = g.norm();
        if (gn < 1e-9) {
            res.skipped += 1;
            continue;
        }
        perturbed.push_back(tangent_perturb(points[i], g / gn, epsilon, rng));
        kept.push_back(int(i));
    }
    if (kept.empty()) return res;
    CurvatureResult core = curvature_core(field, points, ev0, perturbed, kept, weight, grad_out);
    core.skipped = res.skipped;
    return core;
}

CurvatureResult curvature_loss_with_probes(const SdfField& field,
                                           const std::vector<Vec3>& points,
                                           const std::vector<Vec3>& probes, double weight,
                                           AlignedBuffer* grad_out) {
    if (probes.size() != points.size())
        throw std::invalid_argument("curvature_loss_with_probes: size mismatch");
    CurvatureResult res;
    if (points.empty()) return res;

    SdfField::BatchEval ev0;
    field.eval(points, nullptr, ev0);
    std::vector<Vec3> perturbed;
    std::vector<int> kept;
    for (size_t i = 0; i < points.size(); ++i) {
        if (ev0.grad.col(int(i)).norm() < 1e-9) {
            res.skipped += 1;
            continue;
        }
        perturbed.push_back(probes[i]);
        kept.push_back(int(i));
    }
    if (kept.empty()) return res;
    CurvatureResult core = curvature_core(field, points, ev0, perturbed, kept, weight, grad_out);
    core.skipped = res.skipped;
    return core;
}

namespace {

CurvatureResult curvature_core(const SdfField& field, const std::vector<Vec3>& points,
                               SdfField::BatchEval& ev0, const std::vector<Vec3>& perturbed,
                               const std::vector<int>& kept, double weight,
                               AlignedBuffer* grad_out) {
    (void)points;
    CurvatureResult res;

    SdfField::BatchEval ev1;
    field.eval(perturbed, nullptr, ev1);

    const int n = int(kept.size());
    Mat3X bar0 = Mat3X::Zero(3, ev0.n);
    Mat3X bar1 = Mat3X::Zero(3, n);
    double loss = 0;
    for (int k = 0; k < n; ++k) {
        Vec3 g0 = ev0.grad.col(kept[k]);
        Vec3 g1 = ev1.grad.col(k);
        double n0 = g0.norm(), n1 = g1.norm();
        if (n1 < 1e-12) continue;
        double cosv = g0.dot(g1) / (n0 * n1);
        loss += 1.0 - cosv;
        if (grad_out) {
            double s = -weight / double(n);
            bar0.col(kept[k]) += s * (g1 / (n0 * n1) - cosv * g0 / (n0 * n0));
            bar1.col(k) += s * (g0 / (n0 * n1) - cosv * g1 / (n1 * n1));
        }
    }
    if (grad_out) {
        field.backward(ev0, VecX::Zero(ev0.n), bar0, Mat3X(), *grad_out);
        field.backward(ev1, VecX::Zero(n), bar1, Mat3X(), *grad_out);
    }
    res.loss = loss / double(n);
    return res;
}

}  // namespace

namespace {
bool norm3(const ImageBuffer& img, int x, int y, Vec3& v) {
    for (int c = 0; c < 3; ++c) v(c) = img.at(x, y, c);
    return v.norm() > 1e-8;
}
}  // namespace

MutualLossResult mutual_loss(const ImageBuffer& d_gs, const ImageBuffer& d_s,
                             const ImageBuffer& n_gs, const ImageBuffer& n_s,
                             const ImageBuffer& mask, const LossWeights& w) {
    check_shapes(d_gs, d_s, "mutual_loss(depth)");
    check_shapes(n_gs, n_s, "mutual_loss(normal)");
    MutualLossResult r;
    double depth_sum = 0, normal_sum = 0;
    int npix = 0, nn = 0;
    for (int y = 0; y < d_gs.height; ++y)
        for (int x = 0; x < d_gs.width; ++x) {
            if (mask.at(x, y) <= 0.5) continue;
            npix += 1;
            depth_sum += std::abs(d_gs.at(x, y) - d_s.at(x, y));
            Vec3 a, b;
            if (norm3(n_gs, x, y, a) && norm3(n_s, x, y, b)) {
                normal_sum += 1.0 - std::abs(a.dot(b)) / (a.norm() * b.norm());
                nn += 1;
            }
        }
    r.mask_pixels = npix;
    if (npix == 0) return r;  // empty mask: zero with warning left to caller
    r.depth_term = depth_sum / npix;
    r.normal_term = nn > 0 ? normal_sum / nn : 0.0;
    r.value = w.lambda_d * r.depth_term + w.lambda_n * r.normal_term;
    return r;
}

void mutual_loss_backward(const ImageBuffer& d_gs, const ImageBuffer& d_s,
                          const ImageBuffer& n_gs, const ImageBuffer& n_s,
                          const ImageBuffer& mask, const LossWeights& w,
                          ImageBuffer& d_gs_bar, ImageBuffer& d_s_bar,
                          ImageBuffer& n_gs_bar, ImageBuffer& n_s_bar) {
    int npix = 0, nn = 0;
    for (int y = 0; y < d_gs.height; ++y)
        for (int x = 0; x < d_gs.width; ++x) {
            if (mask.at(x, y) <= 0.5) continue;
            npix += 1;
            Vec3 a, b;
            if (norm3(n_gs, x, y, a) && norm3(n_s, x, y, b)) nn += 1;
        }
    if (npix == 0) return;
    auto ensure = [](ImageBuffer& img, const ImageBuffer& like) {
        if (!img.same_shape(like)) img = ImageBuffer(like.width, like.height, like.channels);
    };
    ensure(d_gs_bar, d_gs);
    ensure(d_s_bar, d_s);
    ensure(n_gs_bar, n_gs);
    ensure(n_s_bar, n_s);

    double dscale = w.lambda_d / npix;
    double nscale = nn > 0 ? w.lambda_n / nn : 0.0;
    for (int y = 0; y < d_gs.height; ++y)
        for (int x = 0; x < d_gs.width; ++x) {
            if (mask.at(x, y) <= 0.5) continue;
            double dd = d_gs.at(x, y) - d_s.at(x, y);
            double sgn = dd > 0 ? 1.0 : (dd < 0 ? -1.0 : 0.0);
            d_gs_bar.at(x, y) += dscale * sgn;
            d_s_bar.at(x, y) -= dscale * sgn;
            Vec3 a, b;
            if (!norm3(n_gs, x, y, a) || !norm3(n_s, x, y, b)) continue;
            double na = a.norm(), nb = b.norm();
            double cosv = a.dot(b) / (na * nb);
            double csgn = cosv >= 0 ? 1.0 : -1.0;
            Vec3 da = -csgn * (b / (na * nb) - cosv * a / (na * na));
            Vec3 db = -csgn * (a / (na * nb) - cosv * b / (nb * nb));
            for (int c = 0; c < 3; ++c) {
                n_gs_bar.at(x, y, c) += nscale * da(c);
                n_s_bar.at(x, y, c) += nscale * db(c);
            }
        }
}

TotalLosses total_losses(double l1_gs, double ssim_loss, double l_vol, double l1_sdf,
                         double l_eik, double l_curv, double lambda_curv,
                         double l_mutual, const LossWeights& w) {
    TotalLosses t;
    double w_l1 = w.swap_l1_ssim ? 1.0 - w.lambda1 : w.lambda1;
    t.l_g = w_l1 * l1_gs + (1.0 - w_l1) * ssim_loss + w.lambda_vol * l_vol;
    t.l_s = l1_sdf + w.lambda_eik * l_eik + lambda_curv * l_curv;
    t.l_mutual = l_mutual;
    t.total = t.l_g + t.l_s + t.l_mutual;
    return t;
}

}  // namespace gsdf
