#pragma once

#include "headsplat/types.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace headsplat {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec4T = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;

/// SH coefficients: entry i holds the rgb weights of basis function i.
template <typename T>
using ShCoeffs = std::array<Vec3T<T>, kMaxShCoeffs>;

/// A splat embedded in its parent face. Quaternions are stored (w, x, y, z).
struct LocalSplat {
    std::size_t parent_face = 0;
    Vec3 xyz_em = Vec3::Zero();
    Vec4 rot_em = Vec4(1, 0, 0, 0);
    Vec3 log_scale_em = Vec3::Zero();
    double opacity_raw = 0.0;
    ShCoeffs<double> sh = zero_sh();

    static ShCoeffs<double> zero_sh() {
        ShCoeffs<double> s;
        for (auto& c : s) c.setZero();
        return s;
    }
};

struct SplatModel {
    int sh_degree = 0;
    std::vector<LocalSplat> splats;

    std::size_t size() const { return splats.size(); }
};

/// World-space realisation of a splat, as consumed by the rasterizer.
template <typename T>
struct WorldSplat {
    Vec3T<T> position = Vec3T<T>::Zero();
    Vec4T<T> rotation = Vec4T<T>(1, 0, 0, 0);
    Vec3T<T> scale = Vec3T<T>::Ones();
    T opacity = T(0.5);
    ShCoeffs<T> sh{};
};

template <typename T>
struct SplatWorldT {
    int sh_degree = 0;
    std::vector<WorldSplat<T>> splats;

    std::size_t size() const { return splats.size(); }

    template <typename U>
    SplatWorldT<U> cast() const {
        SplatWorldT<U> out;
        out.sh_degree = sh_degree;
        out.splats.resize(splats.size());
        for (std::size_t i = 0; i < splats.size(); ++i) {
            const auto& s = splats[i];
            auto& d = out.splats[i];
            d.position = s.position.template cast<U>();
            d.rotation = s.rotation.template cast<U>();
            d.scale = s.scale.template cast<U>();
            d.opacity = static_cast<U>(s.opacity);
            for (int k = 0; k < kMaxShCoeffs; ++k) d.sh[k] = s.sh[k].template cast<U>();
        }
        return out;
    }
};

using SplatWorld = SplatWorldT<double>;

/// Gradient of a scalar objective with respect to one splat's parameters.
/// Interpreted either in world space (position, rotation, scale, opacity)
/// or in local space (xyz_em, rot_em, log_scale_em, opacity_raw).
template <typename T>
struct SplatGrad {
    Vec3T<T> position = Vec3T<T>::Zero();
    Vec4T<T> rotation = Vec4T<T>::Zero();
    Vec3T<T> scale = Vec3T<T>::Zero();
    T opacity = T(0);
    ShCoeffs<T> sh = zero();

    static ShCoeffs<T> zero() {
        ShCoeffs<T> s;
        for (auto& c : s) c.setZero();
        return s;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace headsplat
