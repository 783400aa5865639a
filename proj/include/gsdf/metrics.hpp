#pragma once

#include <vector>

#include "gsdf/camera.hpp"
#include "gsdf/image.hpp"

namespace gsdf {

/// Symmetric Chamfer distance: mean nearest-neighbor distance a->b plus
/// b->a, halved. Uses a uniform spatial grid for the NN queries.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// PSNR in dB against range [0,1]; identical images return +infinity
/// (reported capped at 99 dB in CSV output).
double psnr(const ImageBuffer& a, const ImageBuffer& b);

double mse(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace gsdf
