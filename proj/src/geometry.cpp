#include "headsplat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace headsplat {

void TriMesh::validate(double eps) const {
    const auto nv = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (auto idx : faces[f]) {
            if (idx >= nv) {
                throw TopologyMismatch("face " + std::to_string(f) + " references vertex " +
                                       std::to_string(idx) + " but mesh has " +
                                       std::to_string(nv) + " vertices");
            }
        }
        if (face_area(vertices, faces[f]) <= eps) throw DegenerateFace(f);
    }
    std::set<FaceIndex> seen;
    for (const auto& [name, region_faces] : regions) {
        if (std::find(kKeyRegionNames.begin(), kKeyRegionNames.end(), name) ==
            kKeyRegionNames.end()) {
            throw SchemaError("unknown region name '" + name + "'");
        }
        for (auto f : region_faces) {
            if (f >= faces.size()) {
                throw SchemaError("region '" + name + "' references face " + std::to_string(f));
            }
            if (!seen.insert(f).second) {
                throw SchemaError("face " + std::to_string(f) +
                                  " belongs to more than one region");
            }
        }
    }
}

void MeshSequence::validate() const {
    neutral.validate();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& fr = frames[i];
        if (fr.vertices.size() != neutral.vertices.size()) {
            throw TopologyMismatch("frame " + std::to_string(i) + " has " +
                                   std::to_string(fr.vertices.size()) + " vertices, expected " +
                                   std::to_string(neutral.vertices.size()));
        }
        if (std::abs(fr.rotation.norm() - 1.0) > 1e-6) {
            throw SchemaError("frame " + std::to_string(i) + " rigid rotation is not unit norm");
        }
    }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

double face_area(std::span<const Vec3> vertices, const Face& face) {
    return triangle_area(vertices[face[0]], vertices[face[1]], vertices[face[2]]);
}

std::vector<double> face_areas(std::span<const Vec3> vertices, std::span<const Face> faces) {
    std::vector<double> out(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) out[f] = face_area(vertices, faces[f]);
    return out;
}

Vec3 face_centroid(std::span<const Vec3> vertices, const Face& face) {
    return (vertices[face[0]] + vertices[face[1]] + vertices[face[2]]) / 3.0;
}

FaceFrame face_frame(std::span<const Vec3> vertices, const Face& face, double eps) {
    const Vec3& a = vertices[face[0]];
    const Vec3& b = vertices[face[1]];
    const Vec3& c = vertices[face[2]];
    const Vec3 normal = (b - a).cross(c - a);
    const double twice_area = normal.norm();
    if (0.5 * twice_area <= eps) throw DegenerateFace(0, "degenerate face: zero area");

    const Vec3 origin = (a + b + c) / 3.0;
    const Vec3 to_first = a - origin;
    const double len = to_first.norm();
    if (len <= eps) throw DegenerateFace(0, "degenerate face: first vertex at centroid");

    const Vec3 x = to_first / len;
    const Vec3 z = normal / twice_area;
    // x lies in the face plane, so z cross x is already unit length.
    const Vec3 y = z.cross(x);

    FaceFrame out;
    out.origin = origin;
    out.rotation.col(0) = x;
    out.rotation.col(1) = y;
    out.rotation.col(2) = z;
    return out;
}

double face_scale_factor(double area_t, double area_can, double eps) {
    if (area_can <= eps) throw DegenerateFace(0, "degenerate canonical face area");
    return std::sqrt(area_t / area_can);
}

FrameRig build_rig(std::span<const Vec3> vertices, std::span<const Face> faces,
                   std::span<const double> canonical_areas, double eps) {
    if (canonical_areas.size() != faces.size()) {
        throw TopologyMismatch("canonical area count does not match face count");
    }
    FrameRig rig;
    rig.faces.resize(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (auto idx : faces[f]) {
            if (idx >= vertices.size()) {
                throw TopologyMismatch("vertex buffer too small for topology");
            }
        }
        try {
            const auto frame = face_frame(vertices, faces[f], eps);
            auto& out = rig.faces[f];
            out.origin = frame.origin;
            out.rotation = frame.rotation;
            out.area = face_area(vertices, faces[f]);
            out.k = face_scale_factor(out.area, canonical_areas[f], eps);
        } catch (const DegenerateFace& e) {
            throw DegenerateFace(f, "degenerate face while building rig");
        }
    }
    return rig;
}

FrameRig build_frame_rig(const MeshSequence& sequence, std::size_t frame_index) {
    if (frame_index >= sequence.frames.size()) {
        throw Error("frame index " + std::to_string(frame_index) + " out of range");
    }
    const auto& neutral = sequence.neutral;
    const auto canonical = face_areas(neutral.vertices, neutral.faces);
    return build_rig(sequence.frames[frame_index].vertices, neutral.faces, canonical);
}

FrameRig build_neutral_rig(const TriMesh& mesh) {
    const auto canonical = face_areas(mesh.vertices, mesh.faces);
    return build_rig(mesh.vertices, mesh.faces, canonical);
}

std::vector<Vec3> transform_vertices(std::span<const Vec3> vertices, const Quat& q,
                                     const Vec3& t) {
    const Mat3 r = q.normalized().toRotationMatrix();
    std::vector<Vec3> out(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) out[i] = r * vertices[i] + t;
    return out;
}

} // namespace headsplat
