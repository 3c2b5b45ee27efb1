#include "support/cases.hpp"

#include <cmath>

namespace headsplat::testing {

TriMesh single_face(const std::array<Vec3, 3>& t) {
    TriMesh m;
    m.vertices = {t[0], t[1], t[2]};
    m.faces = {{0, 1, 2}};
    return m;
}

WorldSplat<double> direct_formula(const LocalSplat& s, const Mat3& r, const Vec3& o, double k) {
    WorldSplat<double> w;
    w.position = k * (r * s.xyz_em) + o;
    const Quat local = Quat(s.rot_em[0], s.rot_em[1], s.rot_em[2], s.rot_em[3]).normalized();
    Quat q = Quat(r) * local;
    w.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
    w.scale = k * Vec3(std::exp(s.log_scale_em[0]), std::exp(s.log_scale_em[1]), std::exp(s.log_scale_em[2]));
    w.opacity = 1.0 / (1.0 + std::exp(-s.opacity_raw));
    return w;
}

bool same_rotation(const Vec4& a, const Vec4& b, double tol) {
    return (a - b).norm() < tol || (a + b).norm() < tol;
}

TriMesh face_grid() {
    TriMesh m = grid_mesh(8, 0.025);
    auto block = [&](int x0, int y0, int x1, int y1) {
        std::vector<FaceIndex> faces;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                faces.push_back(FaceIndex(2 * (y * 8 + x)));
                faces.push_back(FaceIndex(2 * (y * 8 + x) + 1));
            }
        }
        return faces;
    };
    m.regions["left_eye"] = block(1, 5, 3, 7);
    m.regions["right_eye"] = block(5, 5, 7, 7);
    m.regions["nose"] = block(3, 3, 5, 5);
    m.regions["mouth"] = block(2, 0, 6, 2);
    m.validate();
    return m;
}

std::vector<Vec3> random_deformation(Rng& rng, const TriMesh& mesh, double amplitude) {
    const int blobs = rng.integer(1, 4);
    std::vector<Vec3> out = mesh.vertices;
    for (int b = 0; b < blobs; ++b) {
        const Vec3 c(rng.uniform(0, 0.2), rng.uniform(0, 0.2), 0);
        const double r = rng.uniform(0.02, 0.08);
        const Vec3 d = rng.unit3() * rng.uniform(0.0, amplitude);
        for (auto& v : out) v += d * std::exp(-(v - c).squaredNorm() / (2 * r * r));
    }
    return out;
}

std::vector<double> oracle_offsets(const std::vector<Vec3>& deposed, const TriMesh& neutral) {
    std::vector<double> out;
    for (const auto& f : neutral.faces) {
        Vec3 a = Vec3::Zero(), b = Vec3::Zero();
        for (auto i : f) {
            a += deposed[i];
            b += neutral.vertices[i];
        }
        out.push_back(((a - b) / 3.0).norm());
    }
    return out;
}

bool clear_of_threshold(const std::vector<double>& offsets, const TriMesh& mesh, double t,
                        double margin) {
    for (double o : offsets) {
        if (std::abs(o - t) < margin) return false;
    }
    for (const auto& [name, faces] : mesh.regions) {
        double sum = 0.0;
        for (auto f : faces) sum += offsets[f];
        if (std::abs(sum / double(faces.size()) - t) < margin) return false;
    }
    return true;
}

MeshSequence posed_sequence(const TriMesh& neutral, const std::vector<Vec3>& local, const Quat& q,
                            const Vec3& t) {
    MeshSequence seq;
    seq.neutral = neutral;
    seq.frames.push_back({transform_vertices(local, q, t), q, t});
    return seq;
}

DeformationFixture random_fixture(Rng& rng, const TriMesh& mesh, double threshold) {
    for (;;) {
        DeformationFixture fx;
        fx.local = random_deformation(rng, mesh, 0.05);
        fx.offsets = oracle_offsets(fx.local, mesh);
        if (clear_of_threshold(fx.offsets, mesh, threshold, 1e-6)) return fx;
    }
}

std::size_t HandModel::add_face(double bound) {
    areas.push_back(bound * bound / 2.0);
    return areas.size() - 1;
}

void HandModel::add_splat(std::size_t face, const Vec3& log_scale) {
    LocalSplat sp;
    sp.parent_face = face;
    sp.log_scale_em = log_scale;
    model.splats.push_back(sp);
}

std::array<HandModel, 3> scaling_hand_cases() {
    const double tiny = std::ldexp(1.0, -60);
    const double small = std::log(tiny / 4);
    std::array<HandModel, 3> out;

    const auto f0 = out[0].add_face(tiny);
    out[0].add_splat(f0, Vec3::Constant(small));
    out[0].add_splat(f0, Vec3::Constant(small));

    // One component exceeds its bound by 0.1; 0.1 itself does not survive a
    // log/exp round trip, so the bound is placed 0.1 below an exp() value.
    const double l = std::log(0.15);
    const auto f1 = out[1].add_face(std::exp(l) - 0.1);
    out[1].add_splat(f1, Vec3(small, l, small));
    out[1].add_splat(f1, Vec3::Constant(small));

    // 0.3 and 0.4 round-trip exactly; a 2^-60 bound vanishes when subtracted.
    const auto f2 = out[2].add_face(tiny);
    out[2].add_splat(f2, Vec3(std::log(0.3), small, small));
    out[2].add_splat(f2, Vec3(small, small, std::log(0.4)));
    return out;
}

} // namespace headsplat::testing
