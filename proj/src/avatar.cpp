#include "headsplat/avatar.hpp"

#include "headsplat/quaternion.hpp"

#include <algorithm>
#include <random>

namespace headsplat {

SplatModel init_splats(const TriMesh& neutral, const InitOptions& options) {
    if (options.sh_degree < 0 || options.sh_degree > kMaxShDegree) {
        throw Error("sh_degree must be in [0, 3]");
    }
    SplatModel model;
    model.sh_degree = options.sh_degree;
    model.splats.reserve(neutral.faces.size() * 6);

    const double opacity_raw = logit(options.initial_opacity);
    for (std::size_t f = 0; f < neutral.faces.size(); ++f) {
        const auto& face = neutral.faces[f];
        FaceFrame frame;
        try {
            frame = face_frame(neutral.vertices, face);
        } catch (const DegenerateFace&) {
            throw DegenerateFace(f, "degenerate face during splat initialisation");
        }
        const Vec3& a = neutral.vertices[face[0]];
        const Vec3& b = neutral.vertices[face[1]];
        const Vec3& c = neutral.vertices[face[2]];
        const double mean_edge = ((b - a).norm() + (c - b).norm() + (a - c).norm()) / 3.0;
        const double log_scale = std::log(options.scale_fraction * mean_edge);

        const std::array<Vec3, 6> seeds = {a, b, c, 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)};
        for (const auto& p : seeds) {
            LocalSplat s;
            s.parent_face = f;
            s.xyz_em = frame.rotation.transpose() * (p - frame.origin);
            s.rot_em = Vec4(1, 0, 0, 0);
            s.log_scale_em = Vec3::Constant(log_scale);
            s.opacity_raw = opacity_raw;
            model.splats.push_back(s);
        }
    }
    return model;
}

WorldSplat<double> realize_splat(const LocalSplat& splat, const FaceRig& face) {
    WorldSplat<double> w;
    w.position = face.k * (face.rotation * splat.xyz_em) + face.origin;
    const Vec4 q_face = quat_from_matrix(face.rotation);
    w.rotation = quat_multiply<double>(q_face, splat.rot_em.normalized());
    w.scale = face.k * splat.log_scale_em.array().exp().matrix();
    w.opacity = sigmoid(splat.opacity_raw);
    w.sh = splat.sh;
    return w;
}

SplatWorld realize_world(const SplatModel& model, const FrameRig& rig) {
    check_binding(model, rig.size());
    SplatWorld out;
    out.sh_degree = model.sh_degree;
    out.splats.resize(model.splats.size());
    for (std::size_t i = 0; i < model.splats.size(); ++i) {
        const auto& s = model.splats[i];
        out.splats[i] = realize_splat(s, rig.faces[s.parent_face]);
    }
    return out;
}

SplatGrad<double> chain_to_local(const LocalSplat& splat, const FaceRig& face,
                                 const SplatGrad<double>& world_grad) {
    SplatGrad<double> g;
    g.position = face.k * (face.rotation.transpose() * world_grad.position);

    const Vec4 q_face = quat_from_matrix(face.rotation);
    const Vec4 grad_unit = quat_left_matrix<double>(q_face).transpose() * world_grad.rotation;
    g.rotation = normalize_backward<double>(splat.rot_em, grad_unit);

    const Vec3 scale_world = face.k * splat.log_scale_em.array().exp().matrix();
    g.scale = world_grad.scale.cwiseProduct(scale_world);

    const double op = sigmoid(splat.opacity_raw);
    g.opacity = world_grad.opacity * op * (1.0 - op);
    g.sh = world_grad.sh;
    return g;
}

std::size_t reset_drifting_splats(SplatModel& model, std::span<const double> neutral_areas) {
    check_binding(model, neutral_areas.size());
    std::size_t count = 0;
    for (auto& s : model.splats) {
        if (s.xyz_em.norm() > drift_bound(neutral_areas[s.parent_face])) {
            s.xyz_em.setZero();
            ++count;
        }
    }
    return count;
}

DensifyResult densify_and_prune(const SplatModel& model, std::span<const double> grad_stats,
                                const DensifyConfig& config) {
    if (grad_stats.size() != model.size()) {
        throw DimensionMismatch("gradient statistics do not match splat count");
    }
    DensifyResult result;
    result.model.sh_degree = model.sh_degree;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shrink = std::log(config.split_factor);

    std::vector<LocalSplat> added;
    std::vector<std::size_t> added_origin;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& s = model.splats[i];
        const bool prune = sigmoid(s.opacity_raw) < config.prune_opacity;
        const bool grow = !prune && grad_stats[i] >= config.grad_threshold;
        bool keep = !prune;

        if (grow) {
            const double max_scale = s.log_scale_em.array().exp().maxCoeff();
            if (max_scale > config.split_scale) {
                const Mat3 rot = quat_to_matrix<double>(s.rot_em.normalized());
                const Vec3 scale = s.log_scale_em.array().exp();
                for (int child = 0; child < 2; ++child) {
                    LocalSplat c = s;
                    const Vec3 sample(normal(rng), normal(rng), normal(rng));
                    c.xyz_em = s.xyz_em + rot * scale.cwiseProduct(sample);
                    c.log_scale_em = s.log_scale_em.array() - shrink;
                    added.push_back(c);
                    added_origin.push_back(i);
                }
                keep = false;
                ++result.split;
            } else {
                added.push_back(s);
                added_origin.push_back(i);
                ++result.cloned;
            }
        }
        if (prune) ++result.pruned;
        if (keep) {
            result.model.splats.push_back(s);
            result.origin.push_back(i);
        }
    }
    result.kept = result.model.size();
    for (std::size_t j = 0; j < added.size(); ++j) {
        if (result.model.size() >= config.max_splats) break;
        result.model.splats.push_back(added[j]);
        result.origin.push_back(added_origin[j]);
    }
    return result;
}

void check_binding(const SplatModel& model, std::size_t face_count) {
    for (std::size_t i = 0; i < model.splats.size(); ++i) {
        if (model.splats[i].parent_face >= face_count) {
            throw TopologyMismatch("splat " + std::to_string(i) + " bound to face " +
                                   std::to_string(model.splats[i].parent_face) + " of " +
                                   std::to_string(face_count));
        }
    }
}

} // namespace headsplat
