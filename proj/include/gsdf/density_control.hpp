#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsdf/gaussians.hpp"
#include "gsdf/sdf_field.hpp"

namespace gsdf {

struct DensityControlConfig {
    double sigma2 = 0.005;   // variance of the proximity kernel mu(s)
    double omega_g = 0.0002; // growth geometry weight
    double omega_p = 0.05;   // prune geometry weight
    double tau_g = 0.0002;   // growth threshold
    double tau_p = 0.005;    // prune threshold
    int interval = 100;      // K: iterations between control events
};

/// mu(s) = exp(-s^2 / (2 sigma^2)); even in s, 1 at the surface.
double proximity_weight(double s, double sigma2);

/// eps_g = grad_accum + omega_g * mu(s); grow when eps_g > tau_g.
double growth_score(double grad_accum, double s, const DensityControlConfig& cfg);

/// eps_p = opacity_accum - omega_p * (1 - mu(s)); prune when eps_p < tau_p.
double prune_score(double opacity_accum, double s, const DensityControlConfig& cfg);

struct DensityEvent {
    long iteration = 0;
    int index = 0;
    double sdf = 0.0;
    double eps_g = 0.0;
    double eps_p = 0.0;
    char decision = 'k';  // 'g' grown, 'p' pruned, 'k' kept
};

struct DensityControlResult {
    int grown = 0;
    int pruned = 0;
    std::vector<DensityEvent> events;
    // Index map for optimizer state: survivors keep their old index (in
    // order), children follow with the old index of their parent.
    std::vector<int> kept_indices;
    std::vector<int> child_parents;
};

/// Scores every primitive against the SDF field, spawns a child for each
/// grower (jittered toward the surface along the SDF gradient, scales
/// shrunk x0.8), removes pruned primitives, and resets all stats.
DensityControlResult apply_density_control(GaussianSet& set, const SdfField& field,
                                           const DensityControlConfig& cfg, long iteration,
                                           std::mt19937_64& rng);

void append_event_log(const std::string& path, const DensityControlResult& result);

}  // namespace gsdf
