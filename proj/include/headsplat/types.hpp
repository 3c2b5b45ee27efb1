#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace headsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

using FaceIndex = std::size_t;

// Error hierarchy. Every failure the library reports derives from Error so
// callers (the CLI in particular) can separate domain errors from bugs.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateFace : public Error {
public:
    explicit DegenerateFace(std::size_t face, const std::string& what = "degenerate face")
        : Error(what + " (face " + std::to_string(face) + ")"), face_(face) {}
    std::size_t face() const noexcept { return face_; }

private:
    std::size_t face_;
};

class TopologyMismatch : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class EmptyMask : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class MissingAsset : public Error {
public:
    explicit MissingAsset(const std::string& path)
        : Error("missing asset: " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace headsplat
