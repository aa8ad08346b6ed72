#pragma once

#include <filesystem>

#include "mvps/mesh.hpp"

namespace mvps {

enum class PlyFormat { BinaryLittleEndian, Ascii };

/// Reads PLY (ASCII or binary little-endian) or OBJ, chosen by extension.
/// Polygons are fan-triangulated. Per-vertex red/green/blue become albedo.
TriangleMesh read_mesh(const std::filesystem::path& path);
TriangleMesh read_ply(const std::filesystem::path& path);
TriangleMesh read_obj(const std::filesystem::path& path);

/// Writes by extension (.ply binary little-endian, .obj).
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);
void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace mvps
