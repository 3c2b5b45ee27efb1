#pragma once

#include "headsplat/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace headsplat {

using Face = std::array<std::uint32_t, 3>;

inline constexpr double kDegenerateEpsilon = 1e-12;

/// Region names recognised as key facial regions.
inline const std::array<std::string, 4> kKeyRegionNames = {"left_eye", "right_eye", "mouth",
                                                           "nose"};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::map<std::string, std::vector<FaceIndex>> regions;

    std::size_t num_faces() const { return faces.size(); }
    std::size_t num_vertices() const { return vertices.size(); }

    /// Throws DegenerateFace / TopologyMismatch / SchemaError on violated invariants.
    void validate(double eps = kDegenerateEpsilon) const;
};

/// One animated frame: posed vertices plus the rigid head pose baked into them.
struct MeshFrame {
    std::vector<Vec3> vertices;
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();
};

struct MeshSequence {
    TriMesh neutral;
    std::vector<MeshFrame> frames;

    std::size_t num_frames() const { return frames.size(); }
    void validate() const;
};

struct FaceFrame {
    Vec3 origin;
    Mat3 rotation; // columns are the local x, y, z axes
};

struct FaceRig {
    Vec3 origin;
    Mat3 rotation;
    double area = 0.0;
    double k = 1.0;
};

/// Per-face local frames and deformation scale for one posed mesh.
struct FrameRig {
    std::vector<FaceRig> faces;
    std::size_t size() const { return faces.size(); }
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double face_area(std::span<const Vec3> vertices, const Face& face);
std::vector<double> face_areas(std::span<const Vec3> vertices, std::span<const Face> faces);
Vec3 face_centroid(std::span<const Vec3> vertices, const Face& face);

/// Local frame of a triangle: origin at the vertex centroid, x towards the
/// first vertex, z along the unit normal, y = z cross x.
FaceFrame face_frame(std::span<const Vec3> vertices, const Face& face,
                     double eps = kDegenerateEpsilon);

/// k = sqrt(area_t / area_can).
double face_scale_factor(double area_t, double area_can, double eps = kDegenerateEpsilon);

/// Builds the rig of an arbitrary vertex buffer against canonical face areas.
FrameRig build_rig(std::span<const Vec3> vertices, std::span<const Face> faces,
                   std::span<const double> canonical_areas, double eps = kDegenerateEpsilon);

FrameRig build_frame_rig(const MeshSequence& sequence, std::size_t frame_index);
FrameRig build_neutral_rig(const TriMesh& mesh);

/// Applies x -> q x + t to every vertex.
std::vector<Vec3> transform_vertices(std::span<const Vec3> vertices, const Quat& q, const Vec3& t);

} // namespace headsplat
