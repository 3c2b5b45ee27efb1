#pragma once

#include "headsplat/geometry.hpp"
#include "headsplat/splat.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace headsplat {

struct InitOptions {
    int sh_degree = 0;
    /// Sigmoid-space opacity of new splats. Zero opacity would leave every
    /// splat without gradient, so a small positive value is used.
    double initial_opacity = 0.1;
    /// Isotropic initial scale as a fraction of the parent face's mean edge.
    double scale_fraction = 0.5;
};

/// Seeds six splats per face of the neutral mesh: the three vertices and
/// the three edge midpoints, expressed in the face's local frame.
SplatModel init_splats(const TriMesh& neutral, const InitOptions& options = {});

/// World-space parameters for one rig:
///   position = k R xyz_em + o,  rotation = q(R) (x) rot_em,  scale = k exp(log_scale_em).
SplatWorld realize_world(const SplatModel& model, const FrameRig& rig);

/// Realises a single splat; used to refresh cached frames after a sparse update.
WorldSplat<double> realize_splat(const LocalSplat& splat, const FaceRig& face);

/// Chains world-space gradients of one splat back to its local parameters.
SplatGrad<double> chain_to_local(const LocalSplat& splat, const FaceRig& face,
                                 const SplatGrad<double>& world_grad);

/// Resets to the local origin every splat with |xyz_em| > sqrt(2 area_p),
/// area_p being the neutral area of its parent face. Returns the count.
std::size_t reset_drifting_splats(SplatModel& model, std::span<const double> neutral_areas);

/// Drift bound sqrt(2 area) used by the reset rule and the scaling loss.
inline double drift_bound(double area) { return std::sqrt(2.0 * area); }

struct DensifyConfig {
    bool enabled = false;
    double grad_threshold = 2e-4;
    /// Splats whose largest local scale exceeds this are split, smaller ones cloned.
    double split_scale = 0.02;
    double split_factor = 1.6;
    double prune_opacity = 0.005;
    std::size_t max_splats = 200000;
    int period = 200;
    std::uint64_t seed = 0;
};

struct DensifyResult {
    SplatModel model;
    /// For each output splat, the index of the input splat it derives from.
    std::vector<std::size_t> origin;
    /// Leading entries of `model` that are unmodified input splats.
    std::size_t kept = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Adaptive density control in local coordinates. `grad_stats` holds the
/// mean screen-space positional gradient of each splat over the window.
DensifyResult densify_and_prune(const SplatModel& model, std::span<const double> grad_stats,
                                const DensifyConfig& config);

/// Throws TopologyMismatch if any parent face is out of range.
void check_binding(const SplatModel& model, std::size_t face_count);

} // namespace headsplat
