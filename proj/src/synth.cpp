#include "headsplat/synth.hpp"

#include "headsplat/avatar.hpp"
#include "headsplat/checkpoint.hpp"
#include "headsplat/mesh_io.hpp"
#include "headsplat/renderer.hpp"
#include "headsplat/sh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace headsplat {

namespace fs = std::filesystem;

namespace {

struct RegionCap {
    const char* name;
    Vec3 center;
};

// Directions on the unit sphere; the proxy faces +z with +y up.
const std::array<RegionCap, 4>& region_caps() {
    static const std::array<RegionCap, 4> caps = {{
        {"left_eye", Vec3(0.38, 0.28, 0.88).normalized()},
        {"right_eye", Vec3(-0.38, 0.28, 0.88).normalized()},
        {"mouth", Vec3(0.0, -0.5, 0.86).normalized()},
        {"nose", Vec3(0.0, -0.02, 1.0).normalized()},
    }};
    return caps;
}

constexpr double kCapRadius = 0.3;     // radians, region membership
constexpr double kFalloffRadius = 0.9; // radians, deformation support
const Vec3 kNoseDir = Vec3(0.0, -0.02, 1.0).normalized();

double angle_between(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.normalized().dot(b), -1.0, 1.0));
}

double falloff(double theta, double radius) {
    if (theta >= radius) return 0.0;
    const double r = theta / radius;
    return (1.0 - r * r) * (1.0 - r * r);
}

// The volatile store keeps GCC 11 at -O3 from vectorising the round trip
// into a plain copy of the first two lanes.
Vec3 round_to_float(const Vec3& v) {
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        volatile float f = static_cast<float>(v[i]);
        out[i] = f;
    }
    return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-9);
    return v.normalized();
}

Vec3 clamp01(const Vec3& c) { return c.cwiseMax(0.0).cwiseMin(1.0); }

double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Smooth everywhere outside the key regions: a soft hairline and a gentle
// low-frequency texture.
Vec3 skin_color(const Vec3& p) {
    const Vec3 u = p.normalized();
    const double hair = std::max(smoothstep(0.3, 0.65, u.y()),
                                 smoothstep(-0.1, -0.45, u.z()) * smoothstep(-0.5, -0.2, u.y()));
    const double tex = 0.03 * std::sin(40.0 * p.x() + 1.3) * std::cos(35.0 * p.y() - 0.4) +
                       0.02 * std::sin(50.0 * p.z() + 25.0 * p.y());
    const Vec3 base = (1.0 - hair) * Vec3(0.84, 0.63, 0.52) + hair * Vec3(0.28, 0.18, 0.11);
    return clamp01(base + Vec3::Constant(tex));
}

Vec3 detail_color(const std::string& region, int k) {
    if (region == "mouth") return k % 2 ? Vec3(0.62, 0.1, 0.14) : Vec3(0.92, 0.9, 0.85);
    if (region == "nose") return Vec3(0.55, 0.3, 0.26);
    return k % 2 ? Vec3(0.07, 0.05, 0.04) : Vec3(0.96, 0.96, 0.93);
}

ShCoeffs<double> dc_color(const Vec3& rgb) {
    ShCoeffs<double> sh = LocalSplat::zero_sh();
    sh[0] = (rgb - Vec3::Constant(0.5)) / sh_const::C0;
    return sh;
}

Vec4 quat_vec(const Quat& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }

std::string frame_file(std::size_t f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frames/frame_%04zu.bin", f);
    return buf;
}

std::string image_file(std::size_t f, std::size_t v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "images/f%04zu_v%02zu.png", f, v);
    return buf;
}

} // namespace

int proxy_frequency(int faces) {
    return std::max(1, int(std::lround(std::sqrt(std::max(faces, 1) / 20.0))));
}

TriMesh make_head_proxy(int n) {
    if (n < 1) throw Error("proxy frequency must be at least 1");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    const std::array<Vec3, 12> ico = {
        Vec3(-1, t, 0), Vec3(1, t, 0),  Vec3(-1, -t, 0), Vec3(1, -t, 0),
        Vec3(0, -1, t), Vec3(0, 1, t),  Vec3(0, -1, -t), Vec3(0, 1, -t),
        Vec3(t, 0, -1), Vec3(t, 0, 1),  Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
    const std::array<std::array<int, 3>, 20> ico_faces = {{
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}}};

    // Grid points shared between icosahedron faces are identified by their
    // exact integer barycentric weights on the icosahedron corners.
    std::map<std::vector<std::pair<int, int>>, std::uint32_t> index;
    std::vector<Vec3> dirs;
    auto point = [&](const std::array<int, 3>& c, int i, int j) {
        const int w[3] = {n - i - j, i, j};
        std::vector<std::pair<int, int>> key;
        for (int k = 0; k < 3; ++k) {
            if (w[k] > 0) key.emplace_back(c[k], w[k]);
        }
        std::sort(key.begin(), key.end());
        auto [it, inserted] = index.try_emplace(key, std::uint32_t(dirs.size()));
        if (inserted) {
            Vec3 p = Vec3::Zero();
            for (const auto& [corner, weight] : key) p += double(weight) * ico[corner];
            dirs.push_back(p.normalized());
        }
        return it->second;
    };

    TriMesh mesh;
    for (const auto& c : ico_faces) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n - i; ++j) {
                mesh.faces.push_back({point(c, i, j), point(c, i + 1, j), point(c, i, j + 1)});
                if (i + j < n - 1) {
                    mesh.faces.push_back(
                        {point(c, i + 1, j), point(c, i + 1, j + 1), point(c, i, j + 1)});
                }
            }
        }
    }

    mesh.vertices.resize(dirs.size());
    for (std::size_t v = 0; v < dirs.size(); ++v) {
        const Vec3& u = dirs[v];
        const double bump = 1.0 + 0.12 * falloff(angle_between(u, kNoseDir), 0.35);
        const Vec3 p(0.085 * u.x(), 0.105 * u.y(), 0.095 * u.z());
        mesh.vertices[v] = round_to_float(p * bump);
    }
    for (auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3 normal = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
        if (normal.dot(a + mesh.vertices[f[1]] + mesh.vertices[f[2]]) < 0.0) std::swap(f[1], f[2]);
    }

    for (const auto& cap : region_caps()) mesh.regions[cap.name] = {};
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 u = face_centroid(mesh.vertices, mesh.faces[f]).normalized();
        double best = kCapRadius;
        const char* owner = nullptr;
        for (const auto& cap : region_caps()) {
            const double theta = angle_between(u, cap.center);
            if (theta < best) {
                best = theta;
                owner = cap.name;
            }
        }
        if (owner) mesh.regions[owner].push_back(f);
    }
    mesh.validate();
    return mesh;
}

std::vector<Vec3> deform_proxy(const TriMesh& proxy,
                               std::span<const RegionDeformation> deformations) {
    std::vector<Vec3> out = proxy.vertices;
    for (const auto& d : deformations) {
        const auto cap = std::find_if(region_caps().begin(), region_caps().end(),
                                      [&](const RegionCap& c) { return d.region == c.name; });
        if (cap == region_caps().end()) throw Error("unknown region " + d.region);
        for (std::size_t v = 0; v < out.size(); ++v) {
            const Vec3 u = proxy.vertices[v].normalized();
            const double w = falloff(angle_between(u, cap->center), kFalloffRadius);
            if (w == 0.0) continue;
            Vec3 dir;
            if (d.region == "mouth") {
                dir = Vec3(0.0, std::tanh((u.y() - cap->center.y()) / 0.05), 0.0);
            } else if (d.region == "nose") {
                dir = Vec3(0.0, 0.6, 0.8);
            } else {
                dir = Vec3(0.0, -1.0, -0.4).normalized();
            }
            out[v] += d.amplitude * w * dir;
        }
    }
    return out;
}

SplatModel make_ground_truth(const TriMesh& proxy, const SynthConfig& config,
                             std::mt19937_64& rng) {
    std::vector<std::string> region_of(proxy.faces.size());
    for (const auto& [name, faces] : proxy.regions) {
        for (auto f : faces) region_of[f] = name;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;

    SplatModel model;
    model.sh_degree = 0;
    for (std::size_t f = 0; f < proxy.faces.size(); ++f) {
        const auto& face = proxy.faces[f];
        const FaceFrame frame = face_frame(proxy.vertices, face);
        const Vec3& a = proxy.vertices[face[0]];
        const Vec3& b = proxy.vertices[face[1]];
        const Vec3& c = proxy.vertices[face[2]];
        const double edge = ((b - a).norm() + (c - b).norm() + (a - c).norm()) / 3.0;
        const double bound = drift_bound(face_area(proxy.vertices, face));
        auto to_local = [&](const Vec3& p) { return Vec3(frame.rotation.transpose() * (p - frame.origin)); };

        // Surface splats sit near the same anchors init_splats uses (corners
        // and edge midpoints), so the trained model starts from the right layout.
        const std::array<Vec3, 6> anchors = {a, b, c, 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)};
        for (const Vec3& anchor : anchors) {
            const Vec3 p = anchor + config.anchor_jitter * edge * frame.rotation *
                                        Vec3(normal(rng), normal(rng), 0.0);
            LocalSplat sp;
            sp.parent_face = f;
            sp.xyz_em = to_local(p) + Vec3(0.0, 0.0, 0.02 * edge * normal(rng));
            // A corner plus a jitter tail can land past the drift bound; pull it back in.
            if (sp.xyz_em.norm() > bound) sp.xyz_em *= 0.99 * bound / sp.xyz_em.norm();
            const Quat q = Quat(Eigen::AngleAxisd(uniform(rng, 0.0, two_pi), Vec3::UnitZ())) *
                           Quat(Eigen::AngleAxisd(0.1 * normal(rng), Vec3::UnitX()));
            sp.rot_em = quat_vec(q.normalized());
            sp.log_scale_em = Vec3(std::log(edge * uniform(rng, 0.3, 0.45)),
                                   std::log(edge * uniform(rng, 0.2, 0.35)),
                                   std::log(edge * uniform(rng, 0.1, 0.15)));
            sp.opacity_raw = logit(uniform(rng, 0.85, 0.98));
            const Vec3 jitter(0.01 * normal(rng), 0.01 * normal(rng), 0.01 * normal(rng));
            sp.sh = dc_color(clamp01(skin_color(p) + jitter));
            model.splats.push_back(sp);
        }

        if (region_of[f].empty()) continue;
        for (int s = 0; s < config.detail_splats_per_face; ++s) {
            const double phi = uniform(rng, 0.0, two_pi);
            const double reach = bound * uniform(rng, 0.2, 0.8);
            LocalSplat sp;
            sp.parent_face = f;
            sp.xyz_em = Vec3(reach * std::cos(phi), reach * std::sin(phi), 0.02 * edge);
            sp.rot_em = quat_vec(Quat(Eigen::AngleAxisd(uniform(rng, 0.0, two_pi), Vec3::UnitZ())));
            sp.log_scale_em = Vec3(std::log(edge * uniform(rng, 0.18, 0.3)),
                                   std::log(edge * uniform(rng, 0.12, 0.2)),
                                   std::log(edge * 0.05));
            sp.opacity_raw = logit(0.95);
            sp.sh = dc_color(detail_color(region_of[f], s));
            model.splats.push_back(sp);
        }
    }
    return model;
}

DatasetManifest synth_generate(const SynthConfig& config, const fs::path& out_dir) {
    if (config.faces < 1 || config.frames < 1 || config.views < 1 || config.width < 1 ||
        config.height < 1 || !(config.focal > 0.0) || !(config.camera_distance > 0.0)) {
        throw Error("synthetic dataset parameters must be positive");
    }
    std::mt19937_64 rng(config.seed);
    const TriMesh proxy = make_head_proxy(proxy_frequency(config.faces));
    const SplatModel truth = make_ground_truth(proxy, config, rng);

    fs::create_directories(out_dir / "frames");
    fs::create_directories(out_dir / "images");

    DatasetManifest m;
    m.root = fs::absolute(out_dir);
    m.neutral_mesh = m.root / "neutral.obj";
    m.regions = proxy.regions;
    m.background = Vec3::Ones();
    write_obj(m.neutral_mesh, proxy.vertices, proxy.faces);

    const double fx = config.focal * config.width / 64.0;
    for (int v = 0; v < config.views; ++v) {
        // View 0 is frontal; the rest alternate left/right at growing azimuth.
        const int k = (v + 1) / 2;
        const double sign = v % 2 ? -1.0 : 1.0;
        const double az = v == 0 ? 0.0 : sign * std::min(25.0 * k, 160.0) * std::numbers::pi / 180.0;
        const double el_deg[3] = {18.0, -12.0, 6.0};
        const double el = v == 0 ? 0.0 : el_deg[v % 3] * std::numbers::pi / 180.0;
        const Vec3 eye = config.camera_distance *
                         Vec3(std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el));
        m.cameras.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3::UnitY(), fx, fx, config.width,
                                            config.height));
    }
    if (config.views == 1) {
        m.train_views = {0};
    } else {
        m.test_views = {0};
        for (int v = 1; v < config.views; ++v) m.train_views.push_back(std::size_t(v));
    }

    MeshSequence seq;
    seq.neutral = proxy;
    const auto& caps = region_caps();
    for (int f = 0; f < config.frames; ++f) {
        MeshFrame frame;
        if (f == 0) {
            frame.vertices = proxy.vertices;
        } else {
            std::vector<RegionDeformation> active;
            for (std::size_t r = 0; r < caps.size(); ++r) {
                const bool forced = std::size_t(f - 1) % caps.size() == r;
                const bool on = uniform(rng, 0.0, 1.0) < config.activation_probability;
                const double amp = config.amplitude * uniform(rng, 0.7, 1.0);
                if (forced || on) active.push_back({caps[r].name, amp});
            }
            const Vec3 axis = random_unit(rng);
            const double angle = uniform(rng, 0.0, 0.12);
            const Vec3 shift(uniform(rng, -0.008, 0.008), uniform(rng, -0.008, 0.008),
                             uniform(rng, -0.008, 0.008));
            frame.rotation = Quat(Eigen::AngleAxisd(angle, axis)).normalized();
            frame.translation = shift;
            const auto local = deform_proxy(proxy, active);
            frame.vertices = transform_vertices(local, frame.rotation, frame.translation);
            for (auto& p : frame.vertices) p = round_to_float(p);
        }
        seq.frames.push_back(std::move(frame));
    }
    seq.validate();

    const Vec3T<float> bg = m.background.cast<float>();
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        FrameRecord rec;
        rec.vertices = m.root / frame_file(f);
        rec.rotation = seq.frames[f].rotation;
        rec.translation = seq.frames[f].translation;
        write_vertex_buffer(rec.vertices, seq.frames[f].vertices);

        const auto world = realize_world(truth, build_frame_rig(seq, f)).cast<float>();
        for (std::size_t v = 0; v < m.cameras.size(); ++v) {
            const fs::path img = m.root / image_file(f, v);
            write_png(img, rasterize(world, m.cameras[v], bg));
            rec.images.push_back(img);
        }
        m.frames.push_back(std::move(rec));
    }

    m.ground_truth = m.root / "ground_truth.ckpt";
    save_checkpoint(*m.ground_truth, truth);
    save_manifest(m.root / "manifest.json", m);
    return m;
}

} // namespace headsplat
