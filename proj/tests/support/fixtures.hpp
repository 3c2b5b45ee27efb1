#pragma once

#include "headsplat/avatar.hpp"
#include "headsplat/camera.hpp"
#include "headsplat/geometry.hpp"
#include "headsplat/splat.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace headsplat::testing {

/// Small helper around a seeded engine; all generators take one of these.
struct Rng {
    explicit Rng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine);
    }
    double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(engine); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine); }
    Vec3 vec3(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }
    Vec3 unit3();
    Quat rotation();
    std::mt19937_64 engine;
};

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Triangle with every side at least `min_edge` and area well above the
/// degeneracy epsilon.
std::array<Vec3, 3> random_triangle(Rng& rng, double spread, double min_edge = 0.05);

/// A scene for gradient checks: a handful of faces in front of a camera
/// looking down +z, splats large enough to cover the whole image with
/// alpha >= 1/255 and opacities low enough that no clamp or early exit is hit.
struct GradScene {
    TriMesh canonical;
    std::vector<Vec3> posed;
    FrameRig rig;
    SplatModel model;
    Camera camera;
    Vec3 background;
};

GradScene make_grad_scene(Rng& rng, int max_splats, int image_size);

/// Random splat model bound to `faces` faces with moderate parameters.
SplatModel random_model(Rng& rng, std::size_t faces, int splats, int sh_degree);

/// A model whose world splats cover a `size` x `size` camera looking down +z.
struct RenderScene {
    SplatWorld world;
    Camera camera;
    Vec3 background;
};

RenderScene make_render_scene(Rng& rng, int max_splats, int size);

Camera front_camera(int width, int height, double focal);

/// Bitwise equality of every stored parameter.
bool same_bytes(const LocalSplat& a, const LocalSplat& b);

/// Flat grid mesh in the xy plane: (n x n) quads, two triangles each.
TriMesh grid_mesh(int n, double cell);

} // namespace headsplat::testing

namespace headsplat::testing {

/// Flat view of a splat's local parameters in the order xyz_em, rot_em,
/// log_scale_em, opacity_raw, sh (coefficient-major, rgb inner).
int local_param_count(int sh_degree);
double& local_param(LocalSplat& splat, int index);
double grad_param(const SplatGrad<double>& grad, int index);
const char* local_param_class(int index);

/// True when no pixel of the scene sits at a kink of the forward model: every
/// splat covers every pixel with alpha comfortably inside (1/255, 0.99),
/// colours stay away from the clamp, transmittance never nears the early-exit
/// bound and depths are well separated.
bool scene_is_smooth(const GradScene& scene);

struct GradCheckResult {
    std::size_t checked = 0;
    double worst_ratio = 0.0; // max |a - n| / max(1e-8, 1e-4 max(|a|, |n|)); < 1 passes
    std::string worst;        // description of the worst parameter
};

/// Compares analytic local gradients of sum(weights * render) against
/// central differences with step h.
GradCheckResult check_local_gradients(const GradScene& scene, std::uint64_t weight_seed, double h);

} // namespace headsplat::testing
