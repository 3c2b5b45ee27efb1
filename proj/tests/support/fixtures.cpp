#include "support/fixtures.hpp"

#include "headsplat/sh.hpp"

#include <atomic>
#include <unistd.h>
#include <cmath>
#include <cstring>

namespace headsplat::testing {

namespace fs = std::filesystem;

Vec3 Rng::unit3() {
    Vec3 v;
    do {
        v = Vec3(normal(), normal(), normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
}

Quat Rng::rotation() {
    Quat q(normal(), normal(), normal(), normal());
    while (q.norm() < 1e-6) q = Quat(normal(), normal(), normal(), normal());
    return q.normalized();
}

fs::path scratch_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("headsplat_test_" + name + "_" + std::to_string(::getpid()) + "_" +
                          std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::array<Vec3, 3> random_triangle(Rng& rng, double spread, double min_edge) {
    for (;;) {
        std::array<Vec3, 3> t = {rng.vec3(-spread, spread), rng.vec3(-spread, spread),
                                 rng.vec3(-spread, spread)};
        const double e0 = (t[1] - t[0]).norm();
        const double e1 = (t[2] - t[1]).norm();
        const double e2 = (t[0] - t[2]).norm();
        const double area = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).norm();
        if (std::min({e0, e1, e2}) >= min_edge && area > 0.1 * min_edge * min_edge) return t;
    }
}

Camera front_camera(int width, int height, double focal) {
    Camera cam;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.rotation = Quat::Identity();
    cam.translation = Vec3::Zero();
    return cam;
}

GradScene make_grad_scene(Rng& rng, int max_splats, int size) {
    GradScene s;
    s.camera = front_camera(size, size, 1.25 * size);
    s.background = rng.vec3(0.0, 1.0);

    const int faces = rng.integer(1, 3);
    for (int f = 0; f < faces; ++f) {
        const auto tri = random_triangle(rng, 0.6, 0.2);
        const Vec3 centre(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 3.0 + rng.uniform(-0.5, 0.5));
        const auto base = std::uint32_t(s.canonical.vertices.size());
        for (const auto& v : tri) s.canonical.vertices.push_back(v + centre);
        s.canonical.faces.push_back({base, base + 1, base + 2});
    }
    // Posed copy: small non-rigid jitter so k differs from 1.
    const Quat q(Eigen::AngleAxisd(rng.uniform(0.0, 0.3), rng.unit3()));
    const Vec3 centre(0, 0, 3);
    for (const auto& v : s.canonical.vertices) {
        s.posed.push_back(q * (v - centre) + centre + rng.vec3(-0.08, 0.08));
    }
    s.rig = build_rig(s.posed, s.canonical.faces, face_areas(s.canonical.vertices, s.canonical.faces));

    s.model.sh_degree = rng.integer(0, 3);
    const int n = rng.integer(1, max_splats);
    for (int i = 0; i < n; ++i) {
        LocalSplat sp;
        sp.parent_face = std::size_t(rng.integer(0, faces - 1));
        const double k = s.rig.faces[sp.parent_face].k;
        sp.xyz_em = rng.vec3(-0.3, 0.3);
        const Quat r = rng.rotation();
        sp.rot_em = rng.uniform(0.5, 2.0) * Vec4(r.w(), r.x(), r.y(), r.z());
        for (int a = 0; a < 3; ++a) sp.log_scale_em[a] = std::log(rng.uniform(1.3, 2.0) / k);
        sp.opacity_raw = logit(rng.uniform(0.2, 0.6));
        sp.sh[0] = rng.vec3(-0.6, 0.6);
        for (int c = 1; c < sh_coeff_count(s.model.sh_degree); ++c) sp.sh[c] = rng.vec3(-0.04, 0.04);
        s.model.splats.push_back(sp);
    }
    return s;
}

SplatModel random_model(Rng& rng, std::size_t faces, int splats, int sh_degree) {
    SplatModel m;
    m.sh_degree = sh_degree;
    for (int i = 0; i < splats; ++i) {
        LocalSplat sp;
        sp.parent_face = std::size_t(rng.integer(0, int(faces) - 1));
        sp.xyz_em = rng.vec3(-0.05, 0.05);
        const Quat r = rng.rotation();
        sp.rot_em = Vec4(r.w(), r.x(), r.y(), r.z());
        sp.log_scale_em = rng.vec3(std::log(0.01), std::log(0.05));
        sp.opacity_raw = rng.normal(1.0);
        for (int c = 0; c < sh_coeff_count(sh_degree); ++c) sp.sh[c] = rng.vec3(-0.5, 0.5);
        m.splats.push_back(sp);
    }
    return m;
}

RenderScene make_render_scene(Rng& rng, int max_splats, int size) {
    RenderScene s;
    s.camera = front_camera(size, size, 1.2 * size);
    s.background = rng.vec3(0.0, 1.0);
    s.world.sh_degree = rng.integer(0, 3);
    const int n = rng.integer(1, max_splats);
    for (int i = 0; i < n; ++i) {
        WorldSplat<double> w;
        const double z = rng.uniform(-0.5, 5.0); // some land behind the near plane
        w.position = Vec3(rng.uniform(-0.6, 0.6) * std::max(z, 0.5), rng.uniform(-0.6, 0.6) * std::max(z, 0.5), z);
        const Quat r = rng.rotation();
        w.rotation = Vec4(r.w(), r.x(), r.y(), r.z());
        w.scale = Vec3(std::exp(rng.uniform(-4.0, 0.0)), std::exp(rng.uniform(-4.0, 0.0)),
                       std::exp(rng.uniform(-4.0, 0.0)));
        w.opacity = rng.uniform(0.0, 1.0);
        for (int c = 0; c < sh_coeff_count(s.world.sh_degree); ++c) {
            w.sh[c] = rng.vec3(c == 0 ? -1.5 : -0.3, c == 0 ? 1.5 : 0.3);
        }
        s.world.splats.push_back(w);
    }
    return s;
}

bool same_bytes(const LocalSplat& a, const LocalSplat& b) {
    auto eq = [](const auto& x, const auto& y) { return std::memcmp(&x, &y, sizeof(x)) == 0; };
    if (a.parent_face != b.parent_face) return false;
    if (!eq(a.xyz_em, b.xyz_em) || !eq(a.rot_em, b.rot_em) || !eq(a.log_scale_em, b.log_scale_em)) return false;
    if (!eq(a.opacity_raw, b.opacity_raw)) return false;
    return eq(a.sh, b.sh);
}

TriMesh grid_mesh(int n, double cell) {
    TriMesh m;
    for (int y = 0; y <= n; ++y) {
        for (int x = 0; x <= n; ++x) m.vertices.emplace_back(x * cell, y * cell, 0.0);
    }
    auto id = [n](int x, int y) { return std::uint32_t(y * (n + 1) + x); };
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            m.faces.push_back({id(x, y), id(x + 1, y), id(x + 1, y + 1)});
            m.faces.push_back({id(x, y), id(x + 1, y + 1), id(x, y + 1)});
        }
    }
    return m;
}

} // namespace headsplat::testing

#include "headsplat/renderer.hpp"
#include "headsplat/training.hpp"
#include "support/oracles.hpp"

#include <sstream>

namespace headsplat::testing {

int local_param_count(int sh_degree) { return 11 + 3 * sh_coeff_count(sh_degree); }

double& local_param(LocalSplat& s, int i) {
    if (i < 3) return s.xyz_em[i];
    if (i < 7) return s.rot_em[i - 3];
    if (i < 10) return s.log_scale_em[i - 7];
    if (i == 10) return s.opacity_raw;
    const int k = i - 11;
    return s.sh[k / 3][k % 3];
}

double grad_param(const SplatGrad<double>& g, int i) {
    if (i < 3) return g.position[i];
    if (i < 7) return g.rotation[i - 3];
    if (i < 10) return g.scale[i - 7];
    if (i == 10) return g.opacity;
    const int k = i - 11;
    return g.sh[k / 3][k % 3];
}

const char* local_param_class(int i) {
    if (i < 3) return "position";
    if (i < 7) return "rotation";
    if (i < 10) return "log_scale";
    if (i == 10) return "opacity";
    return "sh";
}

bool scene_is_smooth(const GradScene& scene) {
    const auto world = realize_world(scene.model, scene.rig);
    std::vector<Projected<double>> proj;
    for (const auto& s : world.splats) {
        auto p = project_splat(s, world.sh_degree, scene.camera);
        if (!p) return false;
        for (int c = 0; c < 3; ++c) {
            if (p->rgb[c] < 0.02) return false;
        }
        proj.push_back(*p);
    }
    std::vector<double> depths;
    for (const auto& p : proj) depths.push_back(p.depth);
    std::sort(depths.begin(), depths.end());
    for (std::size_t i = 1; i < depths.size(); ++i) {
        if (depths[i] - depths[i - 1] < 1e-3) return false;
    }
    for (int y = 0; y < scene.camera.height; ++y) {
        for (int x = 0; x < scene.camera.width; ++x) {
            double trans = 1.0;
            for (const auto& p : proj) {
                const double dx = p.mean2d.x() - x, dy = p.mean2d.y() - y;
                const double power =
                    -0.5 * (p.conic[0] * dx * dx + p.conic[2] * dy * dy) - p.conic[1] * dx * dy;
                const double alpha = p.opacity * std::exp(power);
                if (alpha < 2.0 / 255.0 || alpha > 0.95) return false;
                trans *= 1.0 - alpha;
            }
            if (trans < 1e-3) return false;
        }
    }
    return true;
}

GradCheckResult check_local_gradients(const GradScene& scene, std::uint64_t weight_seed, double h) {
    ImageT<double> weights = random_image<double>(weight_seed, scene.camera.width, scene.camera.height);
    for (auto& v : weights.data) v = 2.0 * v - 1.0;

    auto objective = [&](const SplatModel& model) {
        const auto world = realize_world(model, scene.rig);
        const auto img = render(world, scene.camera, scene.background).image;
        double acc = 0.0;
        for (std::size_t i = 0; i < img.data.size(); ++i) acc += weights.data[i] * img.data[i];
        return acc;
    };

    const auto world = realize_world(scene.model, scene.rig);
    const auto out = render(world, scene.camera, scene.background);
    const auto grads = local_gradients<double>(scene.model, scene.rig, world, scene.camera,
                                               scene.background, out.state, weights, std::nullopt);

    GradCheckResult result;
    SplatModel probe = scene.model;
    for (std::size_t s = 0; s < probe.size(); ++s) {
        for (int i = 0; i < local_param_count(probe.sh_degree); ++i) {
            double& param = local_param(probe.splats[s], i);
            const double original = param;
            const double numeric = central_difference(
                [&](double v) {
                    param = v;
                    return objective(probe);
                },
                original, h);
            param = original;
            const double analytic = grad_param(grads[s], i);
            const double bound = std::max(1e-8, 1e-4 * std::max(std::abs(analytic), std::abs(numeric)));
            const double ratio = std::abs(analytic - numeric) / bound;
            ++result.checked;
            if (ratio > result.worst_ratio) {
                result.worst_ratio = ratio;
                std::ostringstream msg;
                msg << "splat " << s << " " << local_param_class(i) << "[" << i << "] analytic "
                    << analytic << " numeric " << numeric;
                result.worst = msg.str();
            }
        }
    }
    return result;
}

} // namespace headsplat::testing
