#pragma once

#include <array>
#include <vector>

#include "mvps/types.hpp"

namespace mvps {

using Triangle = std::array<int, 3>;

/// Indexed triangle mesh. `albedo` is either empty or holds one RGB triple in
/// [0,1] per vertex.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> albedo;

  bool empty() const { return triangles.empty(); }
  bool has_albedo() const { return albedo.size() == vertices.size() && !albedo.empty(); }
};

/// Throws InputError on out-of-range indices or non-finite vertices.
void validate_mesh(const TriangleMesh& mesh);

/// Drops triangles with repeated indices or zero area, then unreferenced
/// vertices. Returns the number of triangles removed.
std::size_t remove_degenerate_triangles(TriangleMesh& mesh);

/// Throws InputError when two triangles traverse a shared edge in the same
/// direction (inconsistent orientation) or an edge has more than two faces.
void check_orientation(const TriangleMesh& mesh);

Vec3 face_normal(const TriangleMesh& mesh, int face);  // unit
double face_area(const TriangleMesh& mesh, int face);
double surface_area(const TriangleMesh& mesh);
/// Signed enclosed volume (positive for outward-oriented closed meshes).
double signed_volume(const TriangleMesh& mesh);
double average_edge_length(const TriangleMesh& mesh);
/// Angle-weighted unit vertex normals.
std::vector<Vec3> vertex_normals(const TriangleMesh& mesh);
/// Axis-aligned bounds as (min, max).
std::pair<Vec3, Vec3> bounding_box(const TriangleMesh& mesh);

/// Icosphere with outward orientation; 20 * 4^subdivisions triangles.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0,
                            const Vec3& center = Vec3::Zero());
/// Axis-aligned box, outward orientation, 12 triangles.
TriangleMesh make_box(const Vec3& min, const Vec3& max);
/// Appends `other` to `mesh` (albedo dropped unless both carry it).
void append_mesh(TriangleMesh& mesh, const TriangleMesh& other);

}  // namespace mvps
