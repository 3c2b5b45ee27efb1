#pragma once

#include "headsplat/splat.hpp"

namespace headsplat {

// Quaternions are Vec4T laid out (w, x, y, z).

template <typename T>
Vec4T<T> quat_multiply(const Vec4T<T>& a, const Vec4T<T>& b) {
    return Vec4T<T>(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                    a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                    a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                    a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

/// Matrix L(a) with a (x) b = L(a) b.
template <typename T>
Eigen::Matrix<T, 4, 4> quat_left_matrix(const Vec4T<T>& a) {
    Eigen::Matrix<T, 4, 4> m;
    m << a[0], -a[1], -a[2], -a[3],
         a[1], a[0], -a[3], a[2],
         a[2], a[3], a[0], -a[1],
         a[3], -a[2], a[1], a[0];
    return m;
}

template <typename T>
Mat3T<T> quat_to_matrix(const Vec4T<T>& q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3T<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
         T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
         T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

inline Vec4 quat_from_matrix(const Mat3& r) {
    const Quat q(r);
    return Vec4(q.w(), q.x(), q.y(), q.z());
}

inline Vec4 to_vec4(const Quat& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }
inline Quat to_quat(const Vec4& v) { return Quat(v[0], v[1], v[2], v[3]); }

/// Gradient of f(q / |q|) with respect to q, given the gradient at the
/// normalised quaternion.
template <typename T>
Vec4T<T> normalize_backward(const Vec4T<T>& q, const Vec4T<T>& grad_unit) {
    const T n = q.norm();
    const Vec4T<T> u = q / n;
    return (grad_unit - u * u.dot(grad_unit)) / n;
}

} // namespace headsplat
