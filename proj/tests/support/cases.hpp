#pragma once

// Generators and reference arithmetic shared by the property tests and the
// acceptance gate.

#include "headsplat/avatar.hpp"
#include "headsplat/geometry.hpp"
#include "support/fixtures.hpp"

#include <array>
#include <vector>

namespace headsplat::testing {

TriMesh single_face(const std::array<Vec3, 3>& t);

/// Direct arithmetic of the world transform, written with Eigen's own
/// quaternion type rather than the library's (w, x, y, z) helpers.
WorldSplat<double> direct_formula(const LocalSplat& s, const Mat3& r, const Vec3& o, double k);

/// Quaternions q and -q are the same rotation.
bool same_rotation(const Vec4& a, const Vec4& b, double tol);

/// 8x8 grid (128 faces, 0.2 units across) with four rectangular key regions.
TriMesh face_grid();

/// Smooth random bump field: a few Gaussian blobs with random displacement vectors.
std::vector<Vec3> random_deformation(Rng& rng, const TriMesh& mesh, double amplitude);

/// Per-face centroid offsets recomputed from scratch.
std::vector<double> oracle_offsets(const std::vector<Vec3>& deposed, const TriMesh& neutral);

/// True when no face offset or region mean lies within `margin` of the threshold.
bool clear_of_threshold(const std::vector<double>& offsets, const TriMesh& mesh, double t,
                        double margin);

/// One-frame sequence whose frame is `local` under the rigid pose (q, t).
MeshSequence posed_sequence(const TriMesh& neutral, const std::vector<Vec3>& local, const Quat& q,
                            const Vec3& t);

struct DeformationFixture {
    std::vector<Vec3> local;
    std::vector<double> offsets;
};

/// Random deformation of `mesh` whose offsets stay at least 1e-6 from `threshold`.
DeformationFixture random_fixture(Rng& rng, const TriMesh& mesh, double threshold);

/// Scaling-loss hand cases are built so every step is exact in double
/// precision: sqrt(fl(b * b)) == b for any b, so a face of area fl(b * b) / 2
/// has drift bound exactly b, and scales are taken from exp() so the model
/// stores them without rounding.
struct HandModel {
    SplatModel model;
    std::vector<double> areas;

    std::size_t add_face(double bound);
    void add_splat(std::size_t face, const Vec3& log_scale);
};

/// The three hand cases with scaling loss 0, 0.1 and 0.5.
std::array<HandModel, 3> scaling_hand_cases();

} // namespace headsplat::testing
