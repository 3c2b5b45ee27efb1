#include "headsplat/camera.hpp"

#include <cmath>

namespace headsplat {

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw SchemaError("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw SchemaError("camera size must be positive");
    if (std::abs(rotation.norm() - 1.0) > 1e-6) throw SchemaError("camera rotation is not unit");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy,
                       int width, int height) {
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = (-up).cross(z).normalized();
    const Vec3 y = z.cross(x);
    Mat3 r;
    r.row(0) = x;
    r.row(1) = y;
    r.row(2) = z;
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.rotation = Quat(r).normalized();
    cam.translation = -(r * eye);
    return cam;
}

nlohmann::json camera_to_json(const Camera& cam) {
    const Quat q = cam.rotation;
    return {{"fx", cam.fx},
            {"fy", cam.fy},
            {"cx", cam.cx},
            {"cy", cam.cy},
            {"width", cam.width},
            {"height", cam.height},
            {"rotation", {q.w(), q.x(), q.y(), q.z()}},
            {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}}};
}

Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    try {
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        const auto r = j.at("rotation").get<std::vector<double>>();
        const auto t = j.at("translation").get<std::vector<double>>();
        if (r.size() != 4 || t.size() != 3) throw SchemaError("camera rotation/translation size");
        cam.rotation = Quat(r[0], r[1], r[2], r[3]);
        cam.translation = Vec3(t[0], t[1], t[2]);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("camera: ") + e.what());
    }
    cam.validate();
    return cam;
}

} // namespace headsplat
