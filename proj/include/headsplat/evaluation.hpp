#pragma once

#include "headsplat/camera.hpp"
#include "headsplat/dataset.hpp"
#include "headsplat/metrics.hpp"
#include "headsplat/selection.hpp"
#include "headsplat/splat.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace headsplat {

/// Nearest visible face at every pixel centre (z-buffered), or -1.
std::vector<std::int64_t> face_id_buffer(std::span<const Vec3> vertices, std::span<const Face> faces,
                                         const Camera& cam);

/// Pixels whose nearest visible face is in `selected` (sorted).
std::vector<std::uint8_t> face_pixel_mask(std::span<const Vec3> vertices,
                                          std::span<const Face> faces,
                                          std::span<const FaceIndex> selected, const Camera& cam);

/// PSNR/SSIM of `model` against the stored images for every frame and each
/// of `views`. With `regions`, entries also carry PSNR over the pixels of
/// the frame's selected faces (skipped where the selection or its footprint
/// is empty).
EvalReport evaluate(const SplatModel& model, const DatasetManifest& manifest,
                    const MeshSequence& sequence, std::span<const std::size_t> views,
                    const SelectionCache* regions = nullptr);

} // namespace headsplat
