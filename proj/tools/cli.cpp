#include "cli.hpp"

#include "headsplat/avatar.hpp"
#include "headsplat/checkpoint.hpp"
#include "headsplat/dataset.hpp"
#include "headsplat/evaluation.hpp"
#include "headsplat/mesh_io.hpp"
#include "headsplat/renderer.hpp"
#include "headsplat/selection.hpp"
#include "headsplat/synth.hpp"
#include "headsplat/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

namespace headsplat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Reads subcommand settings from a JSON object such as
/// {"train": {"iterations": 500}}; flags given on the command line win.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
        return describe(app).dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config file: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

    static json describe(const CLI::App* app) {
        json out = json::object();
        for (const CLI::Option* opt : app->get_options()) {
            const std::string name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            if (opt->count() > 0) {
                const auto& res = opt->results();
                out[name] = res.size() == 1 ? json(res[0]) : json(res);
            } else {
                out[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* sub : app->get_subcommands()) out[sub->get_name()] = describe(sub);
        return out;
    }

private:
    static void flatten(const json& j, std::vector<std::string> parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            } else {
                item.inputs.push_back(scalar(value));
            }
            items.push_back(std::move(item));
        }
    }

    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }
};

void log_resolved(const CLI::App& sub) {
    spdlog::info("resolved config: {}", JsonConfig::describe(&sub).dump());
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

std::string indexed_name(const char* prefix, std::size_t frame, std::size_t view) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_f%04zu_v%02zu.png", prefix, frame, view);
    return buf;
}

// --- synth -------------------------------------------------------------

struct SynthArgs {
    SynthConfig config;
    std::string out;
};

int cmd_synth(const CLI::App& sub, const SynthArgs& a) {
    log_resolved(sub);
    const auto m = synth_generate(a.config, a.out);
    spdlog::info("wrote {} frames x {} views to {}", m.frames.size(), m.cameras.size(),
                 (fs::path(a.out) / "manifest.json").string());
    return kExitOk;
}

// --- select ------------------------------------------------------------

struct SelectArgs {
    std::string manifest;
    double threshold = SelectionConfig{}.threshold;
    std::string out;
    std::string heatmap_dir;
};

void write_heatmap(const fs::path& dir, const MeshSequence& seq, const SelectionCache& cache,
                   const DatasetManifest& manifest) {
    fs::create_directories(dir);
    const auto& mesh = seq.neutral;
    std::vector<double> freq(mesh.faces.size(), 0.0);
    for (const auto& faces : cache.frames) {
        for (auto f : faces) freq[f] += 1.0;
    }
    const double frames = std::max<double>(1.0, double(cache.frames.size()));
    for (auto& v : freq) v /= frames;

    auto heat = [](double t) { return Vec3(t, 0.15, 1.0 - t); };
    std::vector<Vec3> colors(mesh.vertices.size(), Vec3::Zero());
    std::vector<int> counts(mesh.vertices.size(), 0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (auto v : mesh.faces[f]) {
            colors[v] += heat(freq[f]);
            ++counts[v];
        }
    }
    for (std::size_t v = 0; v < colors.size(); ++v) {
        if (counts[v]) colors[v] /= counts[v];
    }
    write_obj(dir / "heatmap.obj", mesh.vertices, mesh.faces, std::span<const Vec3>(colors));

    const std::size_t view = manifest.test_views.empty() ? 0 : manifest.test_views.front();
    const Camera& cam = manifest.cameras.at(view);
    const auto ids = face_id_buffer(mesh.vertices, mesh.faces, cam);
    Image img(cam.width, cam.height);
    for (std::size_t p = 0; p < ids.size(); ++p) {
        const Vec3 c = ids[p] < 0 ? Vec3::Ones() : heat(freq[std::size_t(ids[p])]);
        for (int k = 0; k < 3; ++k) img.data[3 * p + k] = float(c[k]);
    }
    write_png(dir / "heatmap.png", img);
}

int cmd_select(const CLI::App& sub, const SelectArgs& a) {
    log_resolved(sub);
    const auto manifest = load_manifest(a.manifest);
    const auto seq = load_sequence(manifest);
    SelectionConfig sc;
    sc.threshold = a.threshold;
    const auto cache = precompute_selections(seq, sc);
    save_selection_cache(a.out, cache);
    const auto non_empty = cache.non_empty_frames();
    spdlog::info("{} of {} frames have a non-empty selection", non_empty, cache.frames.size());
    if (non_empty == 0) {
        spdlog::warn("every selection is empty: no face moves more than {} from the neutral mesh",
                     a.threshold);
    }
    if (!a.heatmap_dir.empty()) write_heatmap(a.heatmap_dir, seq, cache, manifest);
    return kExitOk;
}

// --- train -------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string selections;
    std::string train_config;
    std::string out;
    std::string init;
    std::optional<int> iterations;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
    std::optional<int> global_period;
    bool no_selective = false;
    bool densify = false;
    int checkpoint_period = 0;
};

int cmd_train(const CLI::App& sub, const TrainArgs& a) {
    TrainConfig config;
    bool background_set = false;
    if (!a.train_config.empty()) {
        std::ifstream in(a.train_config);
        if (!in) throw MissingAsset(a.train_config);
        const json j = json::parse(in);
        background_set = j.contains("background");
        config = train_config_from_json(j);
    }
    if (a.iterations) config.iterations = *a.iterations;
    if (a.seed) config.seed = *a.seed;
    if (a.lambda) config.lambda = *a.lambda;
    if (a.global_period) config.global_period = *a.global_period;
    if (a.no_selective) config.selective = false;
    if (a.densify) config.densify.enabled = true;
    if (a.checkpoint_period) config.checkpoint_period = a.checkpoint_period;

    const auto manifest = load_manifest(a.manifest);
    if (!background_set) config.background = manifest.background;
    config.densify.seed = config.seed;
    config.validate();

    log_resolved(sub);
    spdlog::info("train config: {}", train_config_to_json(config).dump());

    std::optional<SelectionCache> cache;
    if (config.selective) {
        if (a.selections.empty() || !fs::exists(a.selections)) {
            spdlog::error("selective training needs a selection cache{}; run `headsplat select "
                          "--manifest {} --out <cache.json>` first, or pass --no-selective",
                          a.selections.empty() ? "" : " (" + a.selections + " not found)",
                          a.manifest);
            return kExitFailure;
        }
        cache = load_selection_cache(a.selections);
    }

    const auto seq = load_sequence(manifest);
    SplatModel model;
    if (!a.init.empty()) {
        model = load_checkpoint(a.init);
    } else {
        InitOptions init;
        init.sh_degree = config.sh_degree;
        model = init_splats(seq.neutral, init);
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    {
        std::ofstream cfg(out / "train_config.json");
        cfg << train_config_to_json(config).dump(2) << '\n';
    }
    TrainOutputs outputs;
    outputs.metrics_csv = out / "metrics.csv";
    if (config.checkpoint_period > 0) outputs.checkpoint_dir = out / "checkpoints";
    outputs.hooks.after_step = [&](const StepRecord& r, const SplatModel&,
                                   std::span<const std::size_t>) {
        if (r.iteration % 100 == 0) {
            spdlog::info("iter {:5d} {:9s} frame {:3d} l1 {:.5f} dssim {:.5f} total {:.5f}",
                         r.iteration, to_string(r.mode), r.frame, r.terms.l1, r.terms.dssim,
                         r.terms.total);
        }
    };

    const auto result = train(std::move(model), manifest, seq, cache ? &*cache : nullptr, config,
                              outputs);
    save_checkpoint(out / "model.ckpt", result.model);
    if (!result.log.empty()) {
        spdlog::info("total loss: first {:.5f}, last {:.5f}; {} resets, {} densify events",
                     result.log.front().terms.total, result.log.back().terms.total, result.resets,
                     result.densify_events);
    }
    spdlog::info("wrote {}", (out / "model.ckpt").string());
    return kExitOk;
}

// --- render / reenact ------------------------------------------------------

struct RenderArgs {
    std::string manifest;
    std::string model;
    std::vector<std::size_t> frames;
    std::vector<std::size_t> views;
    std::string out;
};

void render_sequence(const SplatModel& model, const MeshSequence& seq,
                     const DatasetManifest& manifest, std::vector<std::size_t> frames,
                     std::vector<std::size_t> views, const fs::path& out, const char* prefix) {
    if (frames.empty()) frames = all_indices(seq.frames.size());
    if (views.empty()) views = all_indices(manifest.cameras.size());
    fs::create_directories(out);
    const Vec3T<float> bg = manifest.background.cast<float>();
    for (auto f : frames) {
        if (f >= seq.frames.size()) throw Error("frame " + std::to_string(f) + " out of range");
        const auto world = realize_world(model, build_frame_rig(seq, f)).cast<float>();
        for (auto v : views) {
            if (v >= manifest.cameras.size()) throw Error("view " + std::to_string(v) + " out of range");
            write_png(out / indexed_name(prefix, f, v), rasterize(world, manifest.cameras[v], bg));
        }
    }
    spdlog::info("rendered {} frames x {} views to {}", frames.size(), views.size(), out.string());
}

int cmd_render(const CLI::App& sub, const RenderArgs& a) {
    log_resolved(sub);
    const auto manifest = load_manifest(a.manifest);
    const auto seq = load_sequence(manifest);
    const auto model = load_checkpoint(a.model);
    check_binding(model, seq.neutral.faces.size());
    render_sequence(model, seq, manifest, a.frames, a.views, a.out, "render");
    return kExitOk;
}

struct ReenactArgs {
    std::string model;
    std::string source;
    std::string driver;
    std::vector<std::size_t> views;
    std::string out;
};

int cmd_reenact(const CLI::App& sub, const ReenactArgs& a) {
    log_resolved(sub);
    const auto source = load_sequence(load_manifest(a.source));
    const auto driver_manifest = load_manifest(a.driver);
    const auto driver = load_sequence(driver_manifest);
    if (source.neutral.faces != driver.neutral.faces) {
        throw TopologyMismatch("driving sequence has " + std::to_string(driver.neutral.faces.size()) +
                               " faces (" + std::to_string(driver.neutral.vertices.size()) +
                               " vertices); the avatar was trained on " +
                               std::to_string(source.neutral.faces.size()) + " faces (" +
                               std::to_string(source.neutral.vertices.size()) + " vertices)");
    }
    const auto model = load_checkpoint(a.model);
    check_binding(model, driver.neutral.faces.size());
    render_sequence(model, driver, driver_manifest, {}, a.views, a.out, "reenact");
    return kExitOk;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
    std::string manifest;
    std::string model;
    std::string selections;
    std::vector<std::size_t> views;
    std::string csv;
    std::string json_out;
};

int cmd_eval(const CLI::App& sub, const EvalArgs& a) {
    log_resolved(sub);
    const auto manifest = load_manifest(a.manifest);
    const auto seq = load_sequence(manifest);
    const auto model = load_checkpoint(a.model);
    std::vector<std::size_t> views = a.views;
    if (views.empty()) views = manifest.test_views.empty() ? manifest.train_views : manifest.test_views;
    std::optional<SelectionCache> cache;
    if (!a.selections.empty()) cache = load_selection_cache(a.selections);
    const auto report = evaluate(model, manifest, seq, views, cache ? &*cache : nullptr);
    if (!a.csv.empty()) report.write_csv(a.csv);
    if (!a.json_out.empty()) report.write_json(a.json_out);
    std::printf("mean_psnr %.4f\nmean_ssim %.6f\n", report.mean_psnr(), report.mean_ssim());
    if (cache) std::printf("mean_region_psnr %.4f\n", report.mean_region_psnr());
    return kExitOk;
}

// --- export-ply ------------------------------------------------------------

struct ExportArgs {
    std::string manifest;
    std::string model;
    std::size_t frame = 0;
    std::string out;
};

int cmd_export_ply(const CLI::App& sub, const ExportArgs& a) {
    log_resolved(sub);
    const auto manifest = load_manifest(a.manifest);
    const auto seq = load_sequence(manifest);
    const auto model = load_checkpoint(a.model);
    const auto world = realize_world(model, build_frame_rig(seq, a.frame));
    std::vector<std::size_t> parents(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) parents[i] = model.splats[i].parent_face;
    export_world_ply(a.out, world, parents);
    spdlog::info("wrote {} splats of frame {} to {}", world.size(), a.frame, a.out);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"headsplat: mesh-embedded Gaussian splat head avatars"};
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file with per-subcommand settings; flags override it");
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->capture_default_str();

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic multi-view head dataset");
    s->add_option("--seed", synth.config.seed, "RNG seed")->capture_default_str();
    s->add_option("--faces", synth.config.faces, "Approximate face count")->capture_default_str();
    s->add_option("--frames", synth.config.frames, "Number of frames")->capture_default_str();
    s->add_option("--views", synth.config.views, "Number of cameras; view 0 is held out")
        ->capture_default_str();
    s->add_option("--width", synth.config.width)->capture_default_str();
    s->add_option("--height", synth.config.height)->capture_default_str();
    s->add_option("--out", synth.out, "Output directory")->required();

    SelectArgs select;
    auto* sel = app.add_subcommand("select", "Precompute per-frame splat selections");
    sel->add_option("--manifest", select.manifest)->required()->check(CLI::ExistingFile);
    sel->add_option("--threshold", select.threshold, "Centroid offset threshold (mesh units)")
        ->capture_default_str();
    sel->add_option("--out", select.out, "Selection cache JSON")->required();
    sel->add_option("--heatmap-dir", select.heatmap_dir, "Write heatmap.obj and heatmap.png here");

    TrainArgs trn;
    auto* t = app.add_subcommand("train", "Train an avatar");
    t->add_option("--manifest", trn.manifest)->required()->check(CLI::ExistingFile);
    t->add_option("--selections", trn.selections, "Selection cache from `select`");
    t->add_option("--train-config", trn.train_config, "Training config JSON");
    t->add_option("--out", trn.out, "Output directory")->required();
    t->add_option("--init", trn.init, "Start from this checkpoint instead of a fresh model");
    t->add_option("--iterations", trn.iterations);
    t->add_option("--seed", trn.seed);
    t->add_option("--lambda", trn.lambda, "D-SSIM weight");
    t->add_option("--global-period", trn.global_period);
    t->add_flag("--no-selective", trn.no_selective, "Update every splat on every iteration");
    t->add_flag("--densify", trn.densify, "Enable densification and pruning");
    t->add_option("--checkpoint-period", trn.checkpoint_period);

    RenderArgs rnd;
    auto* r = app.add_subcommand("render", "Render a trained avatar with the dataset cameras");
    r->add_option("--manifest", rnd.manifest)->required()->check(CLI::ExistingFile);
    r->add_option("--model", rnd.model)->required()->check(CLI::ExistingFile);
    r->add_option("--frames", rnd.frames, "Frame indices (default: all)");
    r->add_option("--views", rnd.views, "View indices (default: all)");
    r->add_option("--out", rnd.out)->required();

    ReenactArgs re;
    auto* rc = app.add_subcommand("reenact", "Drive a trained avatar with another mesh sequence");
    rc->add_option("--model", re.model)->required()->check(CLI::ExistingFile);
    rc->add_option("--source", re.source, "Manifest the avatar was trained on")
        ->required()
        ->check(CLI::ExistingFile);
    rc->add_option("--driver", re.driver, "Manifest of the driving sequence")
        ->required()
        ->check(CLI::ExistingFile);
    rc->add_option("--views", re.views, "Driver view indices (default: all)");
    rc->add_option("--out", re.out)->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "PSNR/SSIM against stored images");
    e->add_option("--manifest", ev.manifest)->required()->check(CLI::ExistingFile);
    e->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
    e->add_option("--selections", ev.selections, "Also report PSNR over selected-face pixels");
    e->add_option("--views", ev.views, "View indices (default: the held-out views)");
    e->add_option("--csv", ev.csv);
    e->add_option("--json", ev.json_out);

    ExportArgs ex;
    auto* x = app.add_subcommand("export-ply", "Write a world-space PLY snapshot of one frame");
    x->add_option("--manifest", ex.manifest)->required()->check(CLI::ExistingFile);
    x->add_option("--model", ex.model)->required()->check(CLI::ExistingFile);
    x->add_option("--frame", ex.frame)->capture_default_str();
    x->add_option("--out", ex.out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return kExitUsage;
    }

    spdlog::drop("headsplat");
    auto logger = spdlog::stderr_logger_mt("headsplat");
    struct DropLogger {
        ~DropLogger() { spdlog::drop("headsplat"); }
    } drop_logger;
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%l] %v");
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*s) return cmd_synth(*s, synth);
        if (*sel) return cmd_select(*sel, select);
        if (*t) return cmd_train(*t, trn);
        if (*r) return cmd_render(*r, rnd);
        if (*rc) return cmd_reenact(*rc, re);
        if (*e) return cmd_eval(*e, ev);
        if (*x) return cmd_export_ply(*x, ex);
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return kExitFailure;
    }
    return kExitUsage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace headsplat::cli
