#pragma once

#include "headsplat/types.hpp"

#include <json.hpp>

namespace headsplat {

/// Pinhole camera, OpenCV axes (x right, y down, z forward).
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    Quat rotation = Quat::Identity(); // world -> camera
    Vec3 translation = Vec3::Zero();

    Mat3 rotation_matrix() const { return rotation.normalized().toRotationMatrix(); }
    Vec3 to_camera(const Vec3& p) const { return rotation_matrix() * p + translation; }
    Vec3 center() const { return -(rotation_matrix().transpose() * translation); }

    void validate() const;

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                          double fy, int width, int height);
};

nlohmann::json camera_to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);

} // namespace headsplat
