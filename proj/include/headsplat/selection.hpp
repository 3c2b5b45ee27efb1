#pragma once

#include "headsplat/geometry.hpp"
#include "headsplat/splat.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace headsplat {

struct SelectionConfig {
    /// Absolute centroid offset in mesh units. 0.01 is calibrated for a
    /// head of roughly 0.2 units across.
    double threshold = 0.01;
    std::vector<std::string> key_regions = {kKeyRegionNames.begin(), kKeyRegionNames.end()};
};

struct SelectionMask {
    std::size_t frame_index = 0;
    std::vector<FaceIndex> selected_faces;     // sorted, unique
    std::vector<std::size_t> selected_splats;  // sorted, unique

    bool empty() const { return selected_faces.empty(); }
};

/// Removes the frame's rigid pose: v' = q^-1 (v - t).
std::vector<Vec3> depose_frame(const MeshSequence& sequence, std::size_t frame_index);

/// Distance between each face centroid in `deposed` and in the neutral mesh.
std::vector<double> face_center_offsets(std::span<const Vec3> deposed, const TriMesh& neutral);

/// Key regions are taken whole when their mean offset exceeds the threshold;
/// every other face is taken when its own offset does. Comparisons are strict.
std::vector<FaceIndex> select_faces(std::span<const double> offsets, const TriMesh& mesh,
                                    const SelectionConfig& config);

/// Splats whose parent face is in `faces` (sorted).
std::vector<std::size_t> splats_on_faces(const SplatModel& model,
                                         std::span<const FaceIndex> faces);

/// Per-face membership flags from a sorted face list.
std::vector<char> face_membership(std::span<const FaceIndex> faces, std::size_t face_count);

SelectionMask build_selection(const MeshSequence& sequence, std::size_t frame_index,
                              const SplatModel& model, const SelectionConfig& config);

/// Face selections for every frame. The cache stores faces only; splat
/// indices are resolved against the current model when a mask is applied.
struct SelectionCache {
    double threshold = 0.0;
    std::vector<std::vector<FaceIndex>> frames;

    std::size_t non_empty_frames() const;
    SelectionMask mask_for(std::size_t frame_index, const SplatModel& model) const;
};

SelectionCache precompute_selections(const MeshSequence& sequence, const SelectionConfig& config);

/// JSON: {"threshold": t, "frames": [{"frame_index": i, "faces": [...]}, ...]}
void save_selection_cache(const std::filesystem::path& path, const SelectionCache& cache);
SelectionCache load_selection_cache(const std::filesystem::path& path);

} // namespace headsplat
