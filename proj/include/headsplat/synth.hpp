#pragma once

#include "headsplat/dataset.hpp"
#include "headsplat/geometry.hpp"
#include "headsplat/splat.hpp"

#include <cstdint>
#include <filesystem>
#include <random>

namespace headsplat {

struct SynthConfig {
    std::uint64_t seed = 7;
    /// Approximate face count; the proxy is a geodesic sphere with 20 n^2 faces.
    int faces = 500;
    int frames = 16;
    int views = 8;
    int width = 64;
    int height = 64;
    /// Focal length in pixels for a 64 pixel wide image; scaled with width.
    double focal = 120.0;
    double camera_distance = 0.5;
    /// Peak displacement of an active key-region deformation.
    double amplitude = 0.04;
    /// In-plane jitter of the hidden model's six surface splats per face,
    /// as a fraction of the mean edge.
    double anchor_jitter = 0.1;
    /// Extra small, high-contrast splats per key-region face.
    int detail_splats_per_face = 3;
    /// Chance that a key region is active in a frame after the first. One
    /// region per frame is always active.
    double activation_probability = 0.65;
};

/// Geodesic sphere of the given frequency squashed into a head-sized
/// ellipsoid (about 0.1 units across) with a nose bump, facing +z with +y up.
/// Key regions are caps on the front.
TriMesh make_head_proxy(int frequency);

/// Frequency n whose 20 n^2 faces is closest to `faces` (at least 1).
int proxy_frequency(int faces);

struct RegionDeformation {
    std::string region;
    double amplitude = 0.0;
};

/// Displaces vertices around the named key regions of the proxy.
std::vector<Vec3> deform_proxy(const TriMesh& proxy, std::span<const RegionDeformation> deformations);

/// The hidden model rendered into a synthetic dataset.
SplatModel make_ground_truth(const TriMesh& proxy, const SynthConfig& config, std::mt19937_64& rng);

/// Writes neutral.obj, frames/*.bin, images/*.png, ground_truth.ckpt and
/// manifest.json under `out_dir`. View 0 is frontal and held out. Frame 0 is
/// the neutral mesh at rest.
DatasetManifest synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

} // namespace headsplat
