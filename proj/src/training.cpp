#include "headsplat/training.hpp"

#include "headsplat/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace headsplat {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must be in [0, 1]");
    if (!(scaling_weight >= 0.0)) throw Error("scaling_weight must be non-negative");
    if (global_period < 1) throw Error("global_period must be at least 1");
    if (iterations < 0) throw Error("iterations must be non-negative");
    if (reset_period < 0) throw Error("reset_period must be non-negative");
    if (densify.period < 1) throw Error("densify period must be at least 1");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) throw Error("sh_degree must be in [0, 3]");
    if (checkpoint_period < 0) throw Error("checkpoint_period must be non-negative");
}

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["lambda"] = c.lambda;
    j["scaling_weight"] = c.scaling_weight;
    j["global_period"] = c.global_period;
    j["iterations"] = c.iterations;
    j["learning_rates"] = {
        {"position", c.lr.position},         {"position_final_factor", c.lr.position_final_factor},
        {"rotation", c.lr.rotation},         {"scale", c.lr.scale},
        {"opacity", c.lr.opacity},           {"sh", c.lr.sh},
    };
    j["reset_period"] = c.reset_period;
    j["densify"] = {
        {"enabled", c.densify.enabled},       {"grad_threshold", c.densify.grad_threshold},
        {"split_scale", c.densify.split_scale}, {"split_factor", c.densify.split_factor},
        {"prune_opacity", c.densify.prune_opacity}, {"max_splats", c.densify.max_splats},
        {"period", c.densify.period},
    };
    j["background"] = {c.background.x(), c.background.y(), c.background.z()};
    j["selective"] = c.selective;
    j["seed"] = c.seed;
    j["sh_degree"] = c.sh_degree;
    j["checkpoint_period"] = c.checkpoint_period;
    return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    try {
        c.lambda = j.value("lambda", c.lambda);
        c.scaling_weight = j.value("scaling_weight", c.scaling_weight);
        c.global_period = j.value("global_period", c.global_period);
        c.iterations = j.value("iterations", c.iterations);
        if (j.contains("learning_rates")) {
            const auto& l = j.at("learning_rates");
            c.lr.position = l.value("position", c.lr.position);
            c.lr.position_final_factor = l.value("position_final_factor", c.lr.position_final_factor);
            c.lr.rotation = l.value("rotation", c.lr.rotation);
            c.lr.scale = l.value("scale", c.lr.scale);
            c.lr.opacity = l.value("opacity", c.lr.opacity);
            c.lr.sh = l.value("sh", c.lr.sh);
        }
        c.reset_period = j.value("reset_period", c.reset_period);
        if (j.contains("densify")) {
            const auto& d = j.at("densify");
            c.densify.enabled = d.value("enabled", c.densify.enabled);
            c.densify.grad_threshold = d.value("grad_threshold", c.densify.grad_threshold);
            c.densify.split_scale = d.value("split_scale", c.densify.split_scale);
            c.densify.split_factor = d.value("split_factor", c.densify.split_factor);
            c.densify.prune_opacity = d.value("prune_opacity", c.densify.prune_opacity);
            c.densify.max_splats = d.value("max_splats", c.densify.max_splats);
            c.densify.period = d.value("period", c.densify.period);
        }
        if (j.contains("background")) {
            const auto b = j.at("background").get<std::vector<double>>();
            if (b.size() != 3) throw SchemaError("background must have 3 entries");
            c.background = Vec3(b[0], b[1], b[2]);
        }
        c.selective = j.value("selective", c.selective);
        c.seed = j.value("seed", c.seed);
        c.sh_degree = j.value("sh_degree", c.sh_degree);
        c.checkpoint_period = j.value("checkpoint_period", c.checkpoint_period);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("train config: ") + e.what());
    }
    c.densify.seed = c.seed;
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingAsset(path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return train_config_from_json(j);
}

const char* to_string(StepMode mode) {
    return mode == StepMode::global ? "global" : "selective";
}

bool is_global_iteration(int iteration, int global_period) {
    return global_period >= 1 && iteration % global_period == 0;
}

std::vector<std::size_t> apply_freeze_mask(const SelectionMask& mask, StepMode mode,
                                           std::size_t splat_count) {
    if (mode == StepMode::selective) return mask.selected_splats;
    std::vector<std::size_t> all(splat_count);
    for (std::size_t i = 0; i < splat_count; ++i) all[i] = i;
    return all;
}

namespace {

template <typename T>
SplatGrad<double> to_double(const SplatGrad<T>& g) {
    SplatGrad<double> d;
    d.position = g.position.template cast<double>();
    d.rotation = g.rotation.template cast<double>();
    d.scale = g.scale.template cast<double>();
    d.opacity = double(g.opacity);
    for (int k = 0; k < kMaxShCoeffs; ++k) d.sh[k] = g.sh[k].template cast<double>();
    return d;
}

bool finite(const LossTerms& t) {
    return std::isfinite(t.l1) && std::isfinite(t.dssim) && std::isfinite(t.scaling) &&
           std::isfinite(t.total);
}

} // namespace

template <typename T>
std::vector<SplatGrad<double>> local_gradients(const SplatModel& model, const FrameRig& rig,
                                               const SplatWorldT<T>& world, const Camera& cam,
                                               const Vec3T<T>& background,
                                               const RenderState<T>& state,
                                               const ImageT<T>& grad_image,
                                               std::optional<std::span<const std::size_t>> subset,
                                               std::vector<double>* mean2d_grad_norm) {
    check_binding(model, rig.size());
    const auto world_grads = rasterize_backward(world, cam, background, state, grad_image);
    std::vector<SplatGrad<double>> out(model.size());
    auto chain = [&](std::size_t i) {
        const auto& s = model.splats[i];
        out[i] = chain_to_local(s, rig.faces[s.parent_face], to_double(world_grads.splats[i]));
    };
    if (subset) {
        for (auto i : *subset) chain(i);
    } else {
        for (std::size_t i = 0; i < model.size(); ++i) chain(i);
    }
    if (mean2d_grad_norm) {
        mean2d_grad_norm->assign(world_grads.mean2d_grad_norm.begin(),
                                 world_grads.mean2d_grad_norm.end());
    }
    return out;
}

template std::vector<SplatGrad<double>> local_gradients<float>(
    const SplatModel&, const FrameRig&, const SplatWorldT<float>&, const Camera&,
    const Vec3T<float>&, const RenderState<float>&, const ImageT<float>&,
    std::optional<std::span<const std::size_t>>, std::vector<double>*);
template std::vector<SplatGrad<double>> local_gradients<double>(
    const SplatModel&, const FrameRig&, const SplatWorldT<double>&, const Camera&,
    const Vec3T<double>&, const RenderState<double>&, const ImageT<double>&,
    std::optional<std::span<const std::size_t>>, std::vector<double>*);

void FrameContext::refresh(const SplatModel& model, std::span<const std::size_t> splats) {
    for (auto i : splats) {
        const auto& s = model.splats[i];
        world.splats[i] = realize_splat(s, rig.faces[s.parent_face]);
    }
}

void FrameContext::rebuild(const SplatModel& model) { world = realize_world(model, rig); }

FrameContext make_frame_context(const MeshSequence& sequence, std::size_t frame,
                                const SplatModel& model, const SelectionCache* selections) {
    FrameContext ctx;
    ctx.frame_index = frame;
    ctx.rig = build_frame_rig(sequence, frame);
    if (selections) {
        ctx.mask = selections->mask_for(frame, model);
    } else {
        ctx.mask.frame_index = frame;
    }
    ctx.world = realize_world(model, ctx.rig);
    return ctx;
}

StepStats train_step(SplatModel& model, SplatAdam& optimizer, FrameContext& context,
                     std::span<const double> neutral_areas, const StepInput& input,
                     const TrainConfig& config, std::vector<double>* grad_accum,
                     std::vector<std::uint32_t>* grad_count) {
    if (!input.camera || !input.ground_truth) throw Error("train_step needs a camera and an image");
    if (optimizer.size() != model.size() || context.world.size() != model.size()) {
        throw DimensionMismatch("optimizer or frame cache out of sync with the model");
    }
    const auto trainable = apply_freeze_mask(context.mask, input.mode, model.size());

    const auto world = context.world.cast<float>();
    const Vec3T<float> bg = config.background.cast<float>();
    const auto rendered = render(world, *input.camera, bg);

    Image grad_image;
    const RgbLoss rgb =
        rgb_loss_with_grad(rendered.image, *input.ground_truth, config.lambda, grad_image);

    std::vector<Vec3> grad_log_scale;
    StepStats stats;
    stats.terms.l1 = rgb.l1;
    stats.terms.dssim = rgb.dssim;
    stats.terms.scaling = scaling_loss_with_grad(
        model, neutral_areas, std::span<const std::size_t>(trainable), grad_log_scale);
    stats.terms.total = assemble_total(stats.terms, config.lambda, config.scaling_weight);
    if (!finite(stats.terms)) {
        std::ostringstream msg;
        msg << std::setprecision(9) << "non-finite loss at iteration " << input.iteration
            << " (frame " << context.frame_index << "): l1=" << stats.terms.l1
            << " dssim=" << stats.terms.dssim << " scaling=" << stats.terms.scaling;
        throw NonFiniteLoss(msg.str());
    }
    if (trainable.empty()) return stats;

    std::vector<double> norms;
    auto grads = local_gradients<float>(model, context.rig, world, *input.camera, bg,
                                        rendered.state, grad_image,
                                        std::span<const std::size_t>(trainable), &norms);
    for (auto i : trainable) grads[i].scale += config.scaling_weight * grad_log_scale[i];

    if (grad_accum && grad_count) {
        for (auto i : trainable) {
            if (!rendered.state.projected[i]) continue;
            (*grad_accum)[i] += norms[i];
            (*grad_count)[i] += 1;
        }
    }

    optimizer.step(model, grads, trainable, config.lr, input.progress);
    context.refresh(model, trainable);
    stats.updated = trainable.size();
    return stats;
}

namespace {

class MetricsLog {
public:
    explicit MetricsLog(const std::optional<std::filesystem::path>& path) {
        if (!path) return;
        out_.open(*path);
        if (!out_) throw IoError("cannot write " + path->string());
        out_ << "iteration,mode,frame,view,l1,dssim,scaling,total\n";
        out_ << std::setprecision(9);
    }
    void write(const StepRecord& r) {
        if (!out_.is_open()) return;
        out_ << r.iteration << ',' << to_string(r.mode) << ',' << r.frame << ',' << r.view << ','
             << r.terms.l1 << ',' << r.terms.dssim << ',' << r.terms.scaling << ','
             << r.terms.total << '\n';
    }

private:
    std::ofstream out_;
};

std::filesystem::path checkpoint_name(const std::filesystem::path& dir, int iteration) {
    std::ostringstream name;
    name << "iter_" << std::setw(6) << std::setfill('0') << iteration << ".ckpt";
    return dir / name.str();
}

} // namespace

TrainResult train(SplatModel model, const DatasetManifest& manifest, const MeshSequence& sequence,
                  const SelectionCache* selections, const TrainConfig& config,
                  const TrainOutputs& outputs) {
    config.validate();
    check_binding(model, sequence.neutral.faces.size());
    if (config.selective) {
        if (!selections) {
            throw Error("selective training needs a selection cache; run `headsplat select` first");
        }
        if (selections->frames.size() != sequence.frames.size()) {
            throw TopologyMismatch("selection cache covers " +
                                   std::to_string(selections->frames.size()) + " frames, sequence has " +
                                   std::to_string(sequence.frames.size()));
        }
    }
    if (manifest.frames.size() != sequence.frames.size()) {
        throw TopologyMismatch("manifest and mesh sequence disagree on frame count");
    }

    TrainResult result;
    if (outputs.checkpoint_dir) std::filesystem::create_directories(*outputs.checkpoint_dir);
    MetricsLog log(outputs.metrics_csv);
    if (config.iterations == 0) {
        result.model = std::move(model);
        return result;
    }

    const auto neutral_areas = face_areas(sequence.neutral.vertices, sequence.neutral.faces);
    SplatAdam optimizer(model.size());
    std::vector<double> grad_accum(model.size(), 0.0);
    std::vector<std::uint32_t> grad_count(model.size(), 0);
    const SelectionCache* masks = config.selective ? selections : nullptr;

    BatchStream stream(manifest, config.seed);
    int iteration = 1;
    while (iteration <= config.iterations) {
        const FrameBatch& batch = stream.next();
        FrameContext ctx = make_frame_context(sequence, batch.frame_index, model, masks);

        for (const auto& view : batch.views) {
            if (iteration > config.iterations) break;
            const bool global =
                !config.selective || is_global_iteration(iteration, config.global_period);

            StepInput input;
            input.camera = &view.camera;
            input.ground_truth = &view.image;
            input.mode = global ? StepMode::global : StepMode::selective;
            input.iteration = iteration;
            input.progress = config.iterations > 1
                                 ? double(iteration - 1) / double(config.iterations - 1)
                                 : 1.0;

            StepRecord record;
            record.iteration = iteration;
            record.mode = input.mode;
            record.frame = batch.frame_index;
            record.view = view.view_index;

            const bool hooked = outputs.hooks.before_step || outputs.hooks.after_step;
            std::vector<std::size_t> trainable;
            if (hooked) trainable = apply_freeze_mask(ctx.mask, input.mode, model.size());
            if (outputs.hooks.before_step) outputs.hooks.before_step(record, model, trainable);

            const auto stats = train_step(model, optimizer, ctx, neutral_areas, input, config,
                                          &grad_accum, &grad_count);
            record.terms = stats.terms;
            record.updated = stats.updated;
            if (outputs.hooks.after_step) outputs.hooks.after_step(record, model, trainable);
            log.write(record);
            result.log.push_back(record);

            bool maintained = false;
            if (config.reset_period > 0 && iteration % config.reset_period == 0) {
                result.resets += reset_drifting_splats(model, neutral_areas);
                maintained = true;
            }
            if (config.densify.enabled && global && iteration % config.densify.period == 0) {
                std::vector<double> stats_mean(model.size(), 0.0);
                for (std::size_t i = 0; i < model.size(); ++i) {
                    if (grad_count[i]) stats_mean[i] = grad_accum[i] / grad_count[i];
                }
                DensifyConfig dc = config.densify;
                dc.seed = config.seed + std::uint64_t(iteration);
                auto dens = densify_and_prune(model, stats_mean, dc);
                optimizer.remap(dens.origin, dens.kept);
                model = std::move(dens.model);
                grad_accum.assign(model.size(), 0.0);
                grad_count.assign(model.size(), 0);
                ++result.densify_events;
                maintained = true;
            }
            if (maintained) {
                if (masks) ctx.mask = masks->mask_for(ctx.frame_index, model);
                ctx.rebuild(model);
                if (outputs.hooks.after_maintenance) outputs.hooks.after_maintenance(iteration, model);
            }
            if (outputs.checkpoint_dir && config.checkpoint_period > 0 &&
                iteration % config.checkpoint_period == 0) {
                save_checkpoint(checkpoint_name(*outputs.checkpoint_dir, iteration), model);
            }
            ++iteration;
        }
    }
    result.model = std::move(model);
    return result;
}

} // namespace headsplat
