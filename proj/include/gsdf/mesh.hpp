#pragma once

#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gsdf/camera.hpp"

namespace gsdf {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

/// Marching cubes over a regular grid of `resolution` cells per axis.
/// Vertices on shared cell edges are welded, so closed level sets come out
/// watertight.
TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& sdf,
                            const Vec3& box_min, const Vec3& box_max, int resolution,
                            double iso = 0.0);

void save_mesh_ply(const std::string& path, const TriangleMesh& mesh);
void save_mesh_obj(const std::string& path, const TriangleMesh& mesh);
TriangleMesh load_mesh_obj(const std::string& path);

struct MeshAudit {
    long boundary_edges = 0;     // edges used by exactly one face
    long nonmanifold_edges = 0;  // edges used by three or more faces
    bool watertight() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};
MeshAudit audit_mesh(const TriangleMesh& mesh);

double mesh_area(const TriangleMesh& mesh);

/// Uniform area-weighted point samples on the mesh surface.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int count,
                                      std::mt19937_64& rng);

}  // namespace gsdf
