#pragma once

#include "headsplat/geometry.hpp"

#include <filesystem>
#include <optional>

namespace headsplat {

/// Reads `v` and triangular `f` records; polygons are fan-triangulated and
/// texture/normal indices after '/' are ignored.
TriMesh read_obj(const std::filesystem::path& path);

/// Writes vertices and 1-based faces. When `vertex_colors` is given each
/// vertex line carries trailing r g b in [0,1].
void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices,
               std::span<const Face> faces,
               std::optional<std::span<const Vec3>> vertex_colors = std::nullopt);

/// Flat little-endian float32 xyz buffer, row-major.
std::vector<Vec3> read_vertex_buffer(const std::filesystem::path& path);
void write_vertex_buffer(const std::filesystem::path& path, std::span<const Vec3> vertices);

/// Dispatches on extension: ".obj" reads positions from an OBJ, anything else
/// is treated as a float32 buffer.
std::vector<Vec3> read_frame_vertices(const std::filesystem::path& path);

} // namespace headsplat
