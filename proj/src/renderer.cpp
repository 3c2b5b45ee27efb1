#include "headsplat/renderer.hpp"

#include "headsplat/quaternion.hpp"
#include "headsplat/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace headsplat {

namespace {

template <typename T>
using Vec2T = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Mat2T = Eigen::Matrix<T, 2, 2>;
template <typename T>
using Mat23T = Eigen::Matrix<T, 2, 3>;

struct CameraT {
    double fx, fy, cx, cy;
    Mat3 w;
    Vec3 t;
    Vec3 center;
};

CameraT unpack(const Camera& cam) {
    return {cam.fx, cam.fy, cam.cx, cam.cy, cam.rotation_matrix(), cam.translation, cam.center()};
}

template <typename T>
Mat23T<T> projection_jacobian(const Vec3T<T>& t, T fx, T fy) {
    const T z = t.z();
    const T z2 = z * z;
    Mat23T<T> j;
    j << fx / z, T(0), -fx * t.x() / z2,
         T(0), fy / z, -fy * t.y() / z2;
    return j;
}

/// Alpha of a projected splat at pixel (px, py); returns false when the
/// splat does not contribute there.
template <typename T>
inline bool splat_alpha(const Projected<T>& p, T px, T py, T& alpha, T& gauss, T& dx, T& dy) {
    dx = p.mean2d.x() - px;
    dy = p.mean2d.y() - py;
    const T power = T(-0.5) * (p.conic[0] * dx * dx + p.conic[2] * dy * dy) - p.conic[1] * dx * dy;
    if (power > T(0)) return false;
    gauss = std::exp(power);
    alpha = std::min(T(kMaxAlpha), p.opacity * gauss);
    return alpha >= T(kMinAlpha);
}

template <typename T>
std::vector<std::uint32_t> depth_order(const std::vector<std::optional<Projected<T>>>& proj) {
    std::vector<std::uint32_t> order;
    order.reserve(proj.size());
    for (std::uint32_t i = 0; i < proj.size(); ++i) {
        if (proj[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const T da = proj[a]->depth, db = proj[b]->depth;
        return da < db || (da == db && a < b);
    });
    return order;
}

template <typename T>
std::vector<std::optional<Projected<T>>> project_all(const SplatWorldT<T>& splats,
                                                     const Camera& cam) {
    std::vector<std::optional<Projected<T>>> out(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        out[i] = project_splat(splats.splats[i], splats.sh_degree, cam);
    }
    return out;
}

// Front-to-back compositing of one pixel over a depth-sorted id list.
template <typename T>
inline void composite_pixel(const std::vector<std::optional<Projected<T>>>& proj,
                            const std::vector<std::uint32_t>& ids, T px, T py,
                            const Vec3T<T>& background, Vec3T<T>& color, T& transmittance,
                            std::uint32_t& last) {
    T trans = T(1);
    Vec3T<T> c = Vec3T<T>::Zero();
    std::uint32_t end = 0;
    for (std::uint32_t k = 0; k < ids.size(); ++k) {
        const auto& p = *proj[ids[k]];
        T alpha, gauss, dx, dy;
        if (!splat_alpha(p, px, py, alpha, gauss, dx, dy)) continue;
        const T next = trans * (T(1) - alpha);
        if (next < T(kMinTransmittance)) break;
        c += p.rgb * (alpha * trans);
        trans = next;
        end = k + 1;
    }
    color = c + trans * background;
    transmittance = trans;
    last = end;
}

} // namespace

template <typename T>
Mat3T<T> world_covariance(const Vec4T<T>& rotation, const Vec3T<T>& scale) {
    const Mat3T<T> r = quat_to_matrix<T>(rotation.normalized());
    const Mat3T<T> m = r * scale.asDiagonal();
    return m * m.transpose();
}

template <typename T>
std::optional<Projected<T>> project_splat(const WorldSplat<T>& splat, int sh_degree,
                                          const Camera& cam) {
    const auto c = unpack(cam);
    const Mat3T<T> w = c.w.cast<T>();
    const Vec3T<T> t = w * splat.position + c.t.cast<T>();
    if (t.z() <= T(kNearPlane)) return std::nullopt;

    Projected<T> p;
    p.cam_pos = t;
    p.depth = t.z();
    p.mean2d = Vec2T<T>(T(c.fx) * t.x() / t.z() + T(c.cx), T(c.fy) * t.y() / t.z() + T(c.cy));

    p.cov3d = world_covariance<T>(splat.rotation, splat.scale);
    const Mat23T<T> m = projection_jacobian<T>(t, T(c.fx), T(c.fy)) * w;
    p.cov2d = m * p.cov3d * m.transpose();
    p.cov2d(0, 1) = p.cov2d(1, 0) = T(0.5) * (p.cov2d(0, 1) + p.cov2d(1, 0));
    p.cov2d(0, 0) += T(kLowPass);
    p.cov2d(1, 1) += T(kLowPass);
    const T det = p.cov2d.determinant();
    if (!(det > T(0))) return std::nullopt;
    p.conic[0] = p.cov2d(1, 1) / det;
    p.conic[1] = -p.cov2d(0, 1) / det;
    p.conic[2] = p.cov2d(0, 0) / det;

    p.opacity = splat.opacity;
    const Vec3T<T> offset = splat.position - c.center.cast<T>();
    p.view_dir = offset / offset.norm();
    T basis[kMaxShCoeffs];
    sh_basis<T>(sh_degree, p.view_dir, basis);
    Vec3T<T> rgb = Vec3T<T>::Constant(T(0.5));
    for (int k = 0; k < sh_coeff_count(sh_degree); ++k) rgb += basis[k] * splat.sh[k];
    for (int ch = 0; ch < 3; ++ch) {
        p.rgb_clamped[ch] = rgb[ch] < T(0);
        if (p.rgb_clamped[ch]) rgb[ch] = T(0);
    }
    p.rgb = rgb;

    const T support = T(kMinAlpha) > p.opacity ? T(0) : std::log(p.opacity / T(kMinAlpha));
    if (support > T(0)) {
        const T r2 = T(2) * support;
        const T hx = std::sqrt(r2 * p.cov2d(0, 0));
        const T hy = std::sqrt(r2 * p.cov2d(1, 1));
        p.x0 = static_cast<int>(std::floor(p.mean2d.x() - hx)) - 1;
        p.x1 = static_cast<int>(std::ceil(p.mean2d.x() + hx)) + 1;
        p.y0 = static_cast<int>(std::floor(p.mean2d.y() - hy)) - 1;
        p.y1 = static_cast<int>(std::ceil(p.mean2d.y() + hy)) + 1;
    }
    return p;
}

template <typename T>
RenderOutput<T> render(const SplatWorldT<T>& splats, const Camera& cam,
                       const Vec3T<T>& background) {
    cam.validate();
    RenderOutput<T> out;
    auto& st = out.state;
    st.projected = project_all(splats, cam);
    const int width = cam.width, height = cam.height;
    st.tiles_x = (width + kTileSize - 1) / kTileSize;
    st.tiles_y = (height + kTileSize - 1) / kTileSize;
    st.tile_lists.assign(std::size_t(st.tiles_x) * st.tiles_y, {});

    // Global depth order; appending in this order keeps every tile list sorted.
    for (auto id : depth_order(st.projected)) {
        const auto& p = *st.projected[id];
        const int x0 = std::max(p.x0, 0), x1 = std::min(p.x1, width - 1);
        const int y0 = std::max(p.y0, 0), y1 = std::min(p.y1, height - 1);
        if (x0 > x1 || y0 > y1) continue;
        for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty) {
            for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx) {
                st.tile_lists[std::size_t(ty) * st.tiles_x + tx].push_back(id);
            }
        }
    }

    out.image = ImageT<T>(width, height);
    st.final_transmittance.assign(std::size_t(width) * height, T(1));
    st.last_contributor.assign(std::size_t(width) * height, 0);
    for (int ty = 0; ty < st.tiles_y; ++ty) {
        for (int tx = 0; tx < st.tiles_x; ++tx) {
            const auto& ids = st.tile_lists[std::size_t(ty) * st.tiles_x + tx];
            for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
                for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
                    const std::size_t pix = std::size_t(y) * width + x;
                    Vec3T<T> color;
                    composite_pixel(st.projected, ids, T(x), T(y), background, color,
                                    st.final_transmittance[pix], st.last_contributor[pix]);
                    for (int ch = 0; ch < 3; ++ch) out.image.data[pix * 3 + ch] = color[ch];
                }
            }
        }
    }
    return out;
}

template <typename T>
ImageT<T> rasterize_reference(const SplatWorldT<T>& splats, const Camera& cam,
                              const Vec3T<T>& background) {
    cam.validate();
    const auto proj = project_all(splats, cam);
    const auto order = depth_order(proj);
    ImageT<T> image(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec3T<T> color;
            T trans;
            std::uint32_t last;
            composite_pixel(proj, order, T(x), T(y), background, color, trans, last);
            for (int ch = 0; ch < 3; ++ch) image.at(x, y, ch) = color[ch];
        }
    }
    return image;
}

template <typename T>
RenderGrads<T> rasterize_backward(const SplatWorldT<T>& splats, const Camera& cam,
                                  const Vec3T<T>& background, const RenderState<T>& st,
                                  const ImageT<T>& grad_image) {
    if (grad_image.width != cam.width || grad_image.height != cam.height) {
        throw DimensionMismatch("gradient image does not match camera size");
    }
    const std::size_t n = splats.size();
    const int width = cam.width, height = cam.height;

    // Screen-space accumulators.
    std::vector<Vec2T<T>> g_mean(n, Vec2T<T>::Zero());
    std::vector<Vec3T<T>> g_conic(n, Vec3T<T>::Zero());
    std::vector<Vec3T<T>> g_rgb(n, Vec3T<T>::Zero());
    std::vector<T> g_opacity(n, T(0));

    for (int ty = 0; ty < st.tiles_y; ++ty) {
        for (int tx = 0; tx < st.tiles_x; ++tx) {
            const auto& ids = st.tile_lists[std::size_t(ty) * st.tiles_x + tx];
            for (int y = ty * kTileSize; y < std::min(height, (ty + 1) * kTileSize); ++y) {
                for (int x = tx * kTileSize; x < std::min(width, (tx + 1) * kTileSize); ++x) {
                    const std::size_t pix = std::size_t(y) * width + x;
                    const Vec3T<T> g(grad_image.data[pix * 3], grad_image.data[pix * 3 + 1],
                                     grad_image.data[pix * 3 + 2]);
                    if (g.isZero()) continue;
                    T trans = st.final_transmittance[pix];
                    Vec3T<T> accum = background;
                    for (std::uint32_t k = st.last_contributor[pix]; k-- > 0;) {
                        const auto id = ids[k];
                        const auto& p = *st.projected[id];
                        T alpha, gauss, dx, dy;
                        if (!splat_alpha(p, T(x), T(y), alpha, gauss, dx, dy)) continue;
                        trans = trans / (T(1) - alpha);
                        g_rgb[id] += g * (alpha * trans);
                        const T g_alpha = trans * g.dot(p.rgb - accum);
                        accum = alpha * p.rgb + (T(1) - alpha) * accum;
                        if (p.opacity * gauss > T(kMaxAlpha)) continue;
                        g_opacity[id] += g_alpha * gauss;
                        const T g_power = g_alpha * alpha;
                        g_mean[id].x() += -g_power * (p.conic[0] * dx + p.conic[1] * dy);
                        g_mean[id].y() += -g_power * (p.conic[1] * dx + p.conic[2] * dy);
                        g_conic[id] += g_power * Vec3T<T>(T(-0.5) * dx * dx, -dx * dy,
                                                          T(-0.5) * dy * dy);
                    }
                }
            }
        }
    }

    const auto c = unpack(cam);
    const Mat3T<T> w = c.w.cast<T>();
    const T fx = T(c.fx), fy = T(c.fy);

    RenderGrads<T> out;
    out.splats.assign(n, SplatGrad<T>{});
    out.mean2d_grad_norm.assign(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
        if (!st.projected[i]) continue;
        const auto& p = *st.projected[i];
        const auto& s = splats.splats[i];
        auto& go = out.splats[i];
        out.mean2d_grad_norm[i] = g_mean[i].norm();

        // conic -> cov2d: dL/dCov = -K G K for symmetric K = Cov^-1.
        Mat2T<T> k;
        k << p.conic[0], p.conic[1], p.conic[1], p.conic[2];
        Mat2T<T> gk;
        gk << g_conic[i][0], T(0.5) * g_conic[i][1], T(0.5) * g_conic[i][1], g_conic[i][2];
        const Mat2T<T> g_cov2 = -k * gk * k;

        // cov2d = M Sigma M^T with M = J W.
        const Vec3T<T>& t = p.cam_pos;
        const Mat23T<T> j = projection_jacobian<T>(t, fx, fy);
        const Mat23T<T> m = j * w;
        const Mat3T<T> g_sigma = m.transpose() * g_cov2 * m;
        const Mat23T<T> g_m = T(2) * g_cov2 * m * p.cov3d;
        const Mat23T<T> g_j = g_m * w.transpose();

        const T z = t.z(), z2 = z * z, z3 = z2 * z;
        Vec3T<T> g_t = Vec3T<T>::Zero();
        g_t.x() += g_j(0, 2) * (-fx / z2);
        g_t.y() += g_j(1, 2) * (-fy / z2);
        g_t.z() += g_j(0, 0) * (-fx / z2) + g_j(0, 2) * (T(2) * fx * t.x() / z3) +
                   g_j(1, 1) * (-fy / z2) + g_j(1, 2) * (T(2) * fy * t.y() / z3);
        // mean2d
        g_t.x() += g_mean[i].x() * fx / z;
        g_t.y() += g_mean[i].y() * fy / z;
        g_t.z() += -g_mean[i].x() * fx * t.x() / z2 - g_mean[i].y() * fy * t.y() / z2;
        go.position = w.transpose() * g_t;

        // Colour: SH coefficients and view direction.
        Vec3T<T> g_color = g_rgb[i];
        for (int ch = 0; ch < 3; ++ch) {
            if (p.rgb_clamped[ch]) g_color[ch] = T(0);
        }
        T basis[kMaxShCoeffs];
        Vec3T<T> dbasis[kMaxShCoeffs];
        sh_basis<T>(splats.sh_degree, p.view_dir, basis, dbasis);
        Vec3T<T> g_dir = Vec3T<T>::Zero();
        for (int kk = 0; kk < sh_coeff_count(splats.sh_degree); ++kk) {
            go.sh[kk] = basis[kk] * g_color;
            g_dir += dbasis[kk] * s.sh[kk].dot(g_color);
        }
        const T dist = (s.position - c.center.cast<T>()).norm();
        go.position += (g_dir - p.view_dir * p.view_dir.dot(g_dir)) / dist;

        // Sigma = M3 M3^T with M3 = R diag(s).
        const Vec4T<T> q = s.rotation.normalized();
        const Mat3T<T> r = quat_to_matrix<T>(q);
        const Mat3T<T> m3 = r * s.scale.asDiagonal();
        const Mat3T<T> g_m3 = T(2) * g_sigma * m3;
        for (int b = 0; b < 3; ++b) go.scale[b] = g_m3.col(b).dot(r.col(b));
        const Mat3T<T> gr = g_m3 * s.scale.asDiagonal();
        const T qw = q[0], qx = q[1], qy = q[2], qz = q[3];
        Vec4T<T> g_q;
        g_q[0] = T(2) * (-qz * gr(0, 1) + qy * gr(0, 2) + qz * gr(1, 0) - qx * gr(1, 2) -
                         qy * gr(2, 0) + qx * gr(2, 1));
        g_q[1] = T(2) * (qy * gr(0, 1) + qz * gr(0, 2) + qy * gr(1, 0) - T(2) * qx * gr(1, 1) -
                         qw * gr(1, 2) + qz * gr(2, 0) + qw * gr(2, 1) - T(2) * qx * gr(2, 2));
        g_q[2] = T(2) * (-T(2) * qy * gr(0, 0) + qx * gr(0, 1) + qw * gr(0, 2) + qx * gr(1, 0) +
                         qz * gr(1, 2) - qw * gr(2, 0) + qz * gr(2, 1) - T(2) * qy * gr(2, 2));
        g_q[3] = T(2) * (-T(2) * qz * gr(0, 0) - qw * gr(0, 1) + qx * gr(0, 2) + qw * gr(1, 0) -
                         T(2) * qz * gr(1, 1) + qy * gr(1, 2) + qx * gr(2, 0) + qy * gr(2, 1));
        go.rotation = normalize_backward<T>(s.rotation, g_q);

        go.opacity = g_opacity[i];
    }
    return out;
}

#define HEADSPLAT_INSTANTIATE(T)                                                                 \
    template Mat3T<T> world_covariance<T>(const Vec4T<T>&, const Vec3T<T>&);                     \
    template std::optional<Projected<T>> project_splat<T>(const WorldSplat<T>&, int,             \
                                                          const Camera&);                        \
    template RenderOutput<T> render<T>(const SplatWorldT<T>&, const Camera&, const Vec3T<T>&);   \
    template ImageT<T> rasterize_reference<T>(const SplatWorldT<T>&, const Camera&,              \
                                              const Vec3T<T>&);                                  \
    template RenderGrads<T> rasterize_backward<T>(const SplatWorldT<T>&, const Camera&,          \
                                                  const Vec3T<T>&, const RenderState<T>&,        \
                                                  const ImageT<T>&);

HEADSPLAT_INSTANTIATE(float)
HEADSPLAT_INSTANTIATE(double)

#undef HEADSPLAT_INSTANTIATE

} // namespace headsplat
