#pragma once

#include "headsplat/splat.hpp"

#include <algorithm>

namespace headsplat {

namespace sh_const {
inline constexpr double C0 = 0.28209479177387814;
inline constexpr double C1 = 0.4886025119029199;
inline constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                 -1.0925484305920792, 0.5462742152960396};
inline constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                 0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                 -0.5900435899266435};
} // namespace sh_const

/// Real SH basis (3DGS sign convention) at `d`, and optionally the partial
/// derivatives of each basis function with respect to d's components.
/// `d` is expected to be unit length; derivatives treat x, y, z as free.
template <typename T>
void sh_basis(int degree, const Vec3T<T>& d, T* basis, Vec3T<T>* dbasis = nullptr) {
    using namespace sh_const;
    const T x = d.x(), y = d.y(), z = d.z();
    basis[0] = T(C0);
    if (dbasis) dbasis[0].setZero();
    if (degree < 1) return;
    const T c1 = T(C1);
    basis[1] = -c1 * y;
    basis[2] = c1 * z;
    basis[3] = -c1 * x;
    if (dbasis) {
        dbasis[1] = Vec3T<T>(0, -c1, 0);
        dbasis[2] = Vec3T<T>(0, 0, c1);
        dbasis[3] = Vec3T<T>(-c1, 0, 0);
    }
    if (degree < 2) return;
    const T xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
    const T a0 = T(C2[0]), a1 = T(C2[1]), a2 = T(C2[2]), a3 = T(C2[3]), a4 = T(C2[4]);
    basis[4] = a0 * xy;
    basis[5] = a1 * yz;
    basis[6] = a2 * (T(2) * zz - xx - yy);
    basis[7] = a3 * xz;
    basis[8] = a4 * (xx - yy);
    if (dbasis) {
        dbasis[4] = Vec3T<T>(a0 * y, a0 * x, 0);
        dbasis[5] = Vec3T<T>(0, a1 * z, a1 * y);
        dbasis[6] = Vec3T<T>(-T(2) * a2 * x, -T(2) * a2 * y, T(4) * a2 * z);
        dbasis[7] = Vec3T<T>(a3 * z, 0, a3 * x);
        dbasis[8] = Vec3T<T>(T(2) * a4 * x, -T(2) * a4 * y, 0);
    }
    if (degree < 3) return;
    const T b0 = T(C3[0]), b1 = T(C3[1]), b2 = T(C3[2]), b3 = T(C3[3]), b4 = T(C3[4]),
            b5 = T(C3[5]), b6 = T(C3[6]);
    basis[9] = b0 * y * (T(3) * xx - yy);
    basis[10] = b1 * xy * z;
    basis[11] = b2 * y * (T(4) * zz - xx - yy);
    basis[12] = b3 * z * (T(2) * zz - T(3) * xx - T(3) * yy);
    basis[13] = b4 * x * (T(4) * zz - xx - yy);
    basis[14] = b5 * z * (xx - yy);
    basis[15] = b6 * x * (xx - T(3) * yy);
    if (dbasis) {
        dbasis[9] = Vec3T<T>(T(6) * b0 * xy, b0 * (T(3) * xx - T(3) * yy), 0);
        dbasis[10] = Vec3T<T>(b1 * yz, b1 * xz, b1 * xy);
        dbasis[11] = Vec3T<T>(-T(2) * b2 * xy, b2 * (T(4) * zz - xx - T(3) * yy), T(8) * b2 * yz);
        dbasis[12] = Vec3T<T>(-T(6) * b3 * xz, -T(6) * b3 * yz, b3 * (T(6) * zz - T(3) * xx - T(3) * yy));
        dbasis[13] = Vec3T<T>(b4 * (T(4) * zz - T(3) * xx - yy), -T(2) * b4 * xy, T(8) * b4 * xz);
        dbasis[14] = Vec3T<T>(T(2) * b5 * xz, -T(2) * b5 * yz, b5 * (xx - yy));
        dbasis[15] = Vec3T<T>(b6 * (T(3) * xx - T(3) * yy), -T(6) * b6 * xy, 0);
    }
}

/// Colour from SH: sum of basis-weighted coefficients plus 0.5, clamped at 0.
template <typename T>
Vec3T<T> eval_sh(int degree, const ShCoeffs<T>& coeffs, const Vec3T<T>& view_dir) {
    T basis[kMaxShCoeffs];
    sh_basis<T>(degree, view_dir, basis);
    Vec3T<T> rgb = Vec3T<T>::Constant(T(0.5));
    for (int k = 0; k < sh_coeff_count(degree); ++k) rgb += basis[k] * coeffs[k];
    return rgb.cwiseMax(T(0));
}

} // namespace headsplat
