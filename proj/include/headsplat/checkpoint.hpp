#pragma once

#include "headsplat/splat.hpp"

#include <filesystem>
#include <span>

namespace headsplat {

/// Binary checkpoint of the local (embedded) model. Little-endian layout:
///   "HSPLAT01" | u32 sh_degree | u64 count | per splat:
///   u64 parent_face, f64 xyz[3], f64 rot[4], f64 log_scale[3], f64 opacity_raw,
///   f64 sh[coeffs][3]
/// Values are stored at full precision, so save/load is lossless.
void save_checkpoint(const std::filesystem::path& path, const SplatModel& model);
SplatModel load_checkpoint(const std::filesystem::path& path);

/// World-space snapshot in the PLY layout used by common splat viewers:
/// x y z, nx ny nz, f_dc_*, f_rest_*, opacity (logit), scale_* (log), rot_*
/// as float, plus an int parent_face property.
void export_world_ply(const std::filesystem::path& path, const SplatWorld& world,
                      std::span<const std::size_t> parent_faces);

struct PlySnapshot {
    SplatWorldT<float> world;
    std::vector<std::size_t> parent_faces;
};

PlySnapshot import_world_ply(const std::filesystem::path& path);

} // namespace headsplat
