#include "gsdf/density_control.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gsdf {

double proximity_weight(double s, double sigma2) {
    if (sigma2 <= 0) throw std::invalid_argument("proximity_weight: sigma2 must be > 0");
    return std::exp(-s * s / (2.0 * sigma2));
}

double growth_score(double grad_accum, double s, const DensityControlConfig& cfg) {
    if (grad_accum < 0) throw std::invalid_argument("growth_score: negative gradient accum");
    return grad_accum + cfg.omega_g * proximity_weight(s, cfg.sigma2);
}

double prune_score(double opacity_accum, double s, const DensityControlConfig& cfg) {
    return opacity_accum - cfg.omega_p * (1.0 - proximity_weight(s, cfg.sigma2));
}

DensityControlResult apply_density_control(GaussianSet& set, const SdfField& field,
                                           const DensityControlConfig& cfg, long iteration,
                                           std::mt19937_64& rng) {
    for (const DensityStats& st : set.stats)
        if (st.count < cfg.interval)
            throw std::invalid_argument(
                "apply_density_control: stats accumulated over fewer than K iterations");

    DensityControlResult result;
    std::vector<GaussianPrimitive> grown_children;
    std::vector<char> keep(set.size(), 1);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (size_t i = 0; i < set.size(); ++i) {
        const GaussianPrimitive& g = set.primitives[i];
        double s = field.sdf_value(g.mean);
        double eg = growth_score(set.stats[i].grad_accum, s, cfg);
        double ep = prune_score(set.stats[i].opacity_accum, s, cfg);
        DensityEvent ev{iteration, int(i), s, eg, ep, 'k'};
        if (ep < cfg.tau_p) {
            keep[i] = 0;
            ev.decision = 'p';
            result.pruned += 1;
        } else if (eg > cfg.tau_g) {
            GaussianPrimitive child = g;
            Vec3 dir = field.sdf_gradient(g.mean);
            double dn = dir.norm();
            if (dn > 1e-12)
                dir = -(s >= 0 ? 1.0 : -1.0) * dir / dn;  // toward the surface
            else
                dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
            DecodedGaussian dec = decode(g);
            double step = 0.5 * dec.scale.mean();
            child.mean = g.mean + step * dir;
            child.log_scale = g.log_scale + Vec3::Constant(std::log(0.8));
            grown_children.push_back(child);
            result.child_parents.push_back(int(i));
            ev.decision = 'g';
            result.grown += 1;
        }
        result.events.push_back(ev);
    }

    GaussianSet next;
    for (size_t i = 0; i < set.size(); ++i)
        if (keep[i]) {
            next.primitives.push_back(set.primitives[i]);
            result.kept_indices.push_back(int(i));
        }
    for (const GaussianPrimitive& c : grown_children) next.primitives.push_back(c);
    next.resize_stats();  // stats reset after each control event
    set = std::move(next);
    return result;
}

void append_event_log(const std::string& path, const DensityControlResult& result) {
    std::ofstream f(path, std::ios::app);
    if (!f) throw std::runtime_error("append_event_log: cannot open " + path);
    f.precision(10);
    for (const DensityEvent& e : result.events)
        f << e.iteration << " " << e.index << " " << e.sdf << " " << e.eps_g << " "
          << e.eps_p << " " << e.decision << "\n";
}

}  // namespace gsdf
