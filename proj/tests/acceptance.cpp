// Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
// exits non-zero if any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 2 3`.

#include "headsplat/avatar.hpp"
#include "headsplat/dataset.hpp"
#include "headsplat/evaluation.hpp"
#include "headsplat/loss.hpp"
#include "headsplat/quaternion.hpp"
#include "headsplat/renderer.hpp"
#include "headsplat/selection.hpp"
#include "headsplat/synth.hpp"
#include "headsplat/training.hpp"
#include "support/cases.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>

#ifndef HEADSPLAT_FIXTURE_CONFIG
#error "HEADSPLAT_FIXTURE_CONFIG must name the fixture training config"
#endif

using namespace headsplat;
using namespace headsplat::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    int scenes = 0, failed = 0;
    std::size_t checked = 0;
    double worst = 0.0;
    std::string worst_what;
    while (scenes < 24) {
        const auto scene = make_grad_scene(rng, 10, 8);
        if (!scene_is_smooth(scene)) continue;
        const auto r = check_local_gradients(scene, 1000 + std::uint64_t(scenes), 1e-5);
        checked += r.checked;
        if (r.worst_ratio >= 1.0) ++failed;
        if (r.worst_ratio > worst) {
            worst = r.worst_ratio;
            worst_what = r.worst;
        }
        ++scenes;
    }
    const double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = failed == 0 && elapsed < 120.0;
    o.detail = fmt("%d scenes, %zu parameters, %d failing, worst error/tolerance %.3f (%s), %.1f s",
                   scenes, checked, failed, worst, worst_what.c_str(), elapsed);
    return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome compositing_oracle() {
    Rng rng(41);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto scene = make_render_scene(rng, 32, 16);
        const auto tiled = rasterize(scene.world, scene.camera, scene.background);
        const auto ref = rasterize_reference(scene.world, scene.camera, scene.background);
        for (std::size_t k = 0; k < tiled.data.size(); ++k) {
            worst = std::max(worst, std::abs(tiled.data[k] - ref.data[k]));
        }
    }
    return {worst <= 1e-6, fmt("100 scenes, max channel difference %.3g", worst)};
}

// --- 3 ---------------------------------------------------------------------

Outcome transform_exactness() {
    Rng rng(24);
    double worst_formula = 0.0, worst_equivariance = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto tri = random_triangle(rng, 1.0);
        const TriMesh mesh = single_face(tri);
        const double k = rng.uniform(0.5, 2.0);
        const Quat q = rng.rotation();
        const Vec3 t = rng.vec3(-2, 2);
        const Vec3 c = (tri[0] + tri[1] + tri[2]) / 3.0;
        std::vector<Vec3> posed;
        for (const auto& v : tri) posed.push_back(q * (k * (v - c)) + c + t);
        const auto areas = face_areas(mesh.vertices, mesh.faces);
        const auto rig = build_rig(posed, mesh.faces, areas);

        SplatModel model = random_model(rng, 1, 3, 0);
        const auto got = realize_world(model, rig);
        for (std::size_t s = 0; s < model.size(); ++s) {
            const auto want = direct_formula(model.splats[s], rig.faces[0].rotation, rig.faces[0].origin,
                                             rig.faces[0].k);
            const auto& g = got.splats[s];
            double err = std::max((g.position - want.position).norm(), (g.scale - want.scale).norm());
            err = std::max(err, std::min((g.rotation - want.rotation).norm(),
                                         (g.rotation + want.rotation).norm()));
            err = std::max(err, std::abs(rig.faces[0].k - k));
            worst_formula = std::max(worst_formula, err);
        }

        // Equivariance: moving the posed mesh rigidly moves every splat the same way.
        const Quat q2 = rng.rotation();
        const Vec3 t2 = rng.vec3(-2, 2);
        const auto moved = realize_world(model, build_rig(transform_vertices(posed, q2, t2), mesh.faces, areas));
        for (std::size_t s = 0; s < model.size(); ++s) {
            const auto& a = got.splats[s];
            const auto& b = moved.splats[s];
            const Vec4 expect = to_vec4(q2 * to_quat(a.rotation));
            double err = std::max((b.position - (q2 * a.position + t2)).norm(), (b.scale - a.scale).norm());
            err = std::max(err, std::min((b.rotation - expect).norm(), (b.rotation + expect).norm()));
            worst_equivariance = std::max(worst_equivariance, err);
        }
    }
    return {worst_formula <= 1e-9 && worst_equivariance <= 1e-9,
            fmt("1000 cases, direct formula %.3g, rigid equivariance %.3g", worst_formula,
                worst_equivariance)};
}

// --- 4 ---------------------------------------------------------------------

Outcome selection_invariants() {
    Rng rng(35);
    const TriMesh mesh = face_grid();
    const auto model = init_splats(mesh);
    int pose = 0, monotone = 0, atomic = 0;
    for (int i = 0; i < 100; ++i) {
        const auto fx = random_fixture(rng, mesh, SelectionConfig{}.threshold);

        const Quat q1 = rng.rotation(), q2 = rng.rotation();
        const Vec3 t1 = rng.vec3(-1, 1), t2 = rng.vec3(-1, 1);
        const auto a = build_selection(posed_sequence(mesh, fx.local, q1, t1), 0, model, {});
        MeshSequence seq;
        seq.neutral = mesh;
        seq.frames.push_back({transform_vertices(transform_vertices(fx.local, q1, t1), q2, t2),
                              (q2 * q1).normalized(), q2 * t1 + t2});
        const auto b = build_selection(seq, 0, model, {});
        pose += a.selected_faces == b.selected_faces && a.selected_splats == b.selected_splats;

        // Thresholds for the monotonicity check also stay clear of every offset.
        SelectionConfig lo, hi;
        do {
            lo.threshold = rng.uniform(0.001, 0.02);
            hi.threshold = lo.threshold + rng.uniform(1e-4, 0.02);
        } while (!clear_of_threshold(fx.offsets, mesh, lo.threshold, 1e-6) ||
                 !clear_of_threshold(fx.offsets, mesh, hi.threshold, 1e-6));
        const auto wide = select_faces(fx.offsets, mesh, lo);
        const auto narrow = select_faces(fx.offsets, mesh, hi);
        monotone += std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end());

        const auto sel = select_faces(fx.offsets, mesh, {});
        bool whole = true;
        for (const auto& [name, faces] : mesh.regions) {
            std::size_t hit = 0;
            for (auto f : faces) hit += std::binary_search(sel.begin(), sel.end(), f);
            whole &= hit == 0 || hit == faces.size();
        }
        atomic += whole;
    }
    return {pose == 100 && monotone == 100 && atomic == 100,
            fmt("100 fixtures: pose invariance %d, threshold monotonicity %d, region atomicity %d",
                pose, monotone, atomic)};
}

// --- fixture shared by 5, 6, 7, 8 and 10 ------------------------------------

struct Fixture {
    DatasetManifest manifest;
    MeshSequence sequence;
    SelectionCache selections;
    TrainConfig config;
};

const Fixture& fixture() {
    static const Fixture fx = [] {
        Fixture f;
        f.manifest = synth_generate(SynthConfig{}, scratch_dir("acceptance_fixture"));
        f.sequence = load_sequence(f.manifest);
        f.selections = precompute_selections(f.sequence, SelectionConfig{});
        f.config = load_train_config(HEADSPLAT_FIXTURE_CONFIG);
        f.config.background = f.manifest.background;
        return f;
    }();
    return fx;
}

struct RunScore {
    double psnr = 0.0;
    double region_psnr = 0.0;
    double seconds = 0.0;
};

std::map<bool, RunScore>& run_cache() {
    static std::map<bool, RunScore> cache;
    return cache;
}

// 2000 iterations from the initial model, scored on the held-out view.
const RunScore& fixture_run(bool selective) {
    auto& cache = run_cache();
    if (auto it = cache.find(selective); it != cache.end()) return it->second;
    const Fixture& fx = fixture();
    TrainConfig config = fx.config;
    config.iterations = 2000;
    config.selective = selective;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train(init_splats(fx.sequence.neutral, InitOptions{config.sh_degree}), fx.manifest,
                              fx.sequence, &fx.selections, config);
    RunScore score;
    score.seconds = seconds_since(t0);
    const auto report = evaluate(result.model, fx.manifest, fx.sequence, fx.manifest.test_views, &fx.selections);
    score.psnr = report.mean_psnr();
    score.region_psnr = report.mean_region_psnr();
    return cache[selective] = score;
}

// --- 5 ---------------------------------------------------------------------

Outcome recovery() {
    const auto& s = fixture_run(true);
    return {s.psnr >= 30.0,
            fmt("held-out PSNR %.2f dB (need >= 30), %.0f s for 2000 iterations", s.psnr, s.seconds)};
}

// --- 6 ---------------------------------------------------------------------

Outcome ablation_direction() {
    const auto& sel = fixture_run(true);
    const auto& glob = fixture_run(false);
    const double region_gain = sel.region_psnr - glob.region_psnr;
    const double overall_gain = sel.psnr - glob.psnr;
    return {region_gain >= 0.3 && overall_gain >= -0.2,
            fmt("region PSNR selective %.2f vs global %.2f (%+.2f dB, need >= +0.3); overall %.2f vs "
                "%.2f (%+.2f dB, need >= -0.2)",
                sel.region_psnr, glob.region_psnr, region_gain, sel.psnr, glob.psnr, overall_gain)};
}

// --- 7 and 8 share one 500-iteration selective run --------------------------

struct AuditRun {
    std::size_t selective_steps = 0;
    std::size_t sampled_steps = 0;
    std::size_t frozen_checked = 0;
    std::size_t frozen_changed = 0;
    std::size_t maintenance_events = 0;
    std::size_t bound_violations = 0;
    bool planted_reset = false;
    int planted_reset_at = -1;
    double worst_total_mismatch = 0.0;
};

const AuditRun& audit_run() {
    static const AuditRun run = [] {
        const Fixture& fx = fixture();
        TrainConfig config = fx.config;
        config.iterations = 500;
        config.selective = true;

        SplatModel model = init_splats(fx.sequence.neutral, InitOptions{config.sh_degree});
        const auto areas = face_areas(fx.sequence.neutral.vertices, fx.sequence.neutral.faces);
        // Plant one splat well past its drift bound.
        const std::size_t planted = model.size() / 2;
        const double bound = drift_bound(areas[model.splats[planted].parent_face]);
        model.splats[planted].xyz_em = Vec3(3.0 * bound, 0.0, 0.0);

        // Sample 10% of the selective iterations up front.
        std::vector<int> selective_iters;
        for (int it = 1; it <= config.iterations; ++it) {
            if (!is_global_iteration(it, config.global_period)) selective_iters.push_back(it);
        }
        std::vector<int> sampled;
        std::mt19937_64 rng(77);
        std::sample(selective_iters.begin(), selective_iters.end(), std::back_inserter(sampled),
                    (selective_iters.size() + 9) / 10, rng);
        const std::set<int> sample_set(sampled.begin(), sampled.end());

        AuditRun r;
        r.selective_steps = selective_iters.size();
        std::vector<std::pair<std::size_t, LocalSplat>> snapshot;
        TrainOutputs outputs;
        outputs.hooks.before_step = [&](const StepRecord& rec, const SplatModel& m,
                                        std::span<const std::size_t> trainable) {
            snapshot.clear();
            if (rec.mode != StepMode::selective || !sample_set.count(rec.iteration)) return;
            std::vector<bool> live(m.size(), false);
            for (auto i : trainable) live[i] = true;
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (!live[i]) snapshot.emplace_back(i, m.splats[i]);
            }
        };
        outputs.hooks.after_step = [&](const StepRecord& rec, const SplatModel& m,
                                       std::span<const std::size_t>) {
            r.worst_total_mismatch = std::max(
                r.worst_total_mismatch,
                std::abs(rec.terms.total - assemble_total(rec.terms, config.lambda, config.scaling_weight)));
            if (rec.mode != StepMode::selective || !sample_set.count(rec.iteration)) return;
            ++r.sampled_steps;
            for (const auto& [i, before] : snapshot) {
                ++r.frozen_checked;
                r.frozen_changed += !same_bytes(before, m.splats[i]);
            }
        };
        outputs.hooks.after_maintenance = [&](int iteration, const SplatModel& m) {
            ++r.maintenance_events;
            for (const auto& s : m.splats) {
                r.bound_violations += s.xyz_em.norm() > drift_bound(areas[s.parent_face]);
            }
            if (!r.planted_reset && m.splats[planted].xyz_em.norm() <= bound) {
                r.planted_reset = true;
                r.planted_reset_at = iteration;
            }
        };
        train(std::move(model), fx.manifest, fx.sequence, &fx.selections, config, outputs);
        return r;
    }();
    return run;
}

Outcome freeze_soundness() {
    const auto& r = audit_run();
    const bool enough = r.sampled_steps * 10 >= r.selective_steps;
    return {enough && r.frozen_checked > 0 && r.frozen_changed == 0,
            fmt("%zu of %zu selective steps sampled, %zu frozen splat snapshots, %zu changed",
                r.sampled_steps, r.selective_steps, r.frozen_checked, r.frozen_changed)};
}

Outcome reset_rule() {
    const auto& r = audit_run();
    const int period = fixture().config.reset_period;
    const bool in_time = r.planted_reset && r.planted_reset_at <= period;
    return {r.maintenance_events > 0 && r.bound_violations == 0 && in_time,
            fmt("%zu maintenance steps, %zu bound violations; planted splat reset at iteration %d "
                "(period %d)",
                r.maintenance_events, r.bound_violations, r.planted_reset_at, period)};
}

// --- 9 ---------------------------------------------------------------------

Outcome loss_identities() {
    Rng rng(7);
    double worst = 0.0;
    for (double lambda : {0.0, 0.2, 1.0}) {
        for (int i = 0; i < 100; ++i) {
            LossTerms t;
            if (i % 2) {
                t.l1 = rng.uniform();
                t.dssim = rng.uniform();
            } else {
                const auto a = random_image<float>(std::uint64_t(i), 16, 16);
                const auto b = random_image<float>(std::uint64_t(i) + 500, 16, 16);
                const auto parts = rgb_loss(a, b);
                t.l1 = parts.l1;
                t.dssim = parts.dssim;
            }
            t.scaling = rng.uniform(0, 0.1);
            const double ws = rng.uniform(0, 2);
            const double expect = (1 - lambda) * t.l1 + lambda * t.dssim + ws * t.scaling;
            worst = std::max(worst, std::abs(assemble_total(t, lambda, ws) - expect));
        }
    }
    worst = std::max(worst, audit_run().worst_total_mismatch);

    const auto cases = scaling_hand_cases();
    const double want[3] = {0.0, 0.1, 0.5};
    double got[3];
    bool exact = true;
    for (int i = 0; i < 3; ++i) {
        got[i] = scaling_loss(cases[std::size_t(i)].model, cases[std::size_t(i)].areas);
        exact &= got[i] == want[i];
    }
    return {worst <= 1e-9 && exact,
            fmt("assembly worst difference %.3g over lambda {0, 0.2, 1} and training records; scaling "
                "hand cases %.17g, %.17g, %.17g",
                worst, got[0], got[1], got[2])};
}

// --- 10 --------------------------------------------------------------------

Outcome prefetch_bound() {
    BatchStream stream(fixture().manifest, 10);
    const std::size_t limit = 2 * stream.batch_bytes();
    std::size_t worst = 0;
    for (int i = 0; i < 1000; ++i) {
        stream.next();
        worst = std::max(worst, stream.tracker().current());
    }
    worst = std::max(worst, stream.tracker().peak());
    return {worst <= limit && worst > 0,
            fmt("1000 batches, peak %zu bytes, limit %zu (2 x %zu)", worst, limit, stream.batch_bytes())};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", gradient_correctness},
        {2, "compositing oracle", compositing_oracle},
        {3, "transform exactness", transform_exactness},
        {4, "selection invariants", selection_invariants},
        {5, "recovery", recovery},
        {6, "ablation direction", ablation_direction},
        {7, "freeze soundness", freeze_soundness},
        {8, "reset rule", reset_rule},
        {9, "loss identities", loss_identities},
        {10, "prefetch memory bound", prefetch_bound},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
