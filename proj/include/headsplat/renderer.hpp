#pragma once

#include "headsplat/camera.hpp"
#include "headsplat/image.hpp"
#include "headsplat/splat.hpp"

#include <optional>
#include <vector>

namespace headsplat {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPass = 0.3;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

/// Screen-space footprint of one splat.
template <typename T>
struct Projected {
    Eigen::Matrix<T, 2, 1> mean2d;
    Eigen::Matrix<T, 2, 2> cov2d; // includes the low-pass term
    T conic[3];                    // inverse of cov2d: (a, b, c) = [[a, b], [b, c]]
    T depth = 0;
    T opacity = 0;
    Vec3T<T> rgb;
    Vec3T<T> cam_pos;  // splat centre in camera coordinates
    Vec3T<T> view_dir; // unit direction camera centre -> splat (world)
    Mat3T<T> cov3d;
    bool rgb_clamped[3] = {false, false, false};
    // Inclusive pixel bounds containing every pixel with alpha >= 1/255.
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
};

/// Sigma = R S S^T R^T with R from the (normalised) quaternion.
template <typename T>
Mat3T<T> world_covariance(const Vec4T<T>& rotation, const Vec3T<T>& scale);

/// EWA projection. Returns nullopt when the splat is behind the near plane.
template <typename T>
std::optional<Projected<T>> project_splat(const WorldSplat<T>& splat, int sh_degree,
                                          const Camera& cam);

template <typename T>
struct RenderState {
    std::vector<std::optional<Projected<T>>> projected;
    std::vector<std::vector<std::uint32_t>> tile_lists; // depth-sorted splat ids per tile
    std::vector<T> final_transmittance;                 // per pixel
    std::vector<std::uint32_t> last_contributor;        // per pixel, exclusive end in tile list
    int tiles_x = 0, tiles_y = 0;
};

template <typename T>
struct RenderOutput {
    ImageT<T> image;
    RenderState<T> state;
};

/// Tile-binned front-to-back compositing.
template <typename T>
RenderOutput<T> render(const SplatWorldT<T>& splats, const Camera& cam,
                       const Vec3T<T>& background);

template <typename T>
ImageT<T> rasterize(const SplatWorldT<T>& splats, const Camera& cam, const Vec3T<T>& background) {
    return render(splats, cam, background).image;
}

/// Reference compositor: every pixel walks the globally depth-sorted list of
/// all splats. No binning, no early tile exit. Used as a test oracle.
template <typename T>
ImageT<T> rasterize_reference(const SplatWorldT<T>& splats, const Camera& cam,
                              const Vec3T<T>& background);

template <typename T>
struct RenderGrads {
    std::vector<SplatGrad<T>> splats;   // world-space gradients
    std::vector<T> mean2d_grad_norm;    // |dL/d mean2d| per splat
};

/// Gradients of sum(grad_image * image) with respect to every world-space
/// splat parameter. Culled splats receive exactly zero.
template <typename T>
RenderGrads<T> rasterize_backward(const SplatWorldT<T>& splats, const Camera& cam,
                                  const Vec3T<T>& background, const RenderState<T>& state,
                                  const ImageT<T>& grad_image);

template <typename T>
RenderGrads<T> rasterize_backward(const SplatWorldT<T>& splats, const Camera& cam,
                                  const Vec3T<T>& background, const ImageT<T>& grad_image) {
    const auto out = render(splats, cam, background);
    return rasterize_backward(splats, cam, background, out.state, grad_image);
}

} // namespace headsplat
