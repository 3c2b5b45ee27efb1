#pragma once

#include "headsplat/avatar.hpp"
#include "headsplat/camera.hpp"
#include "headsplat/dataset.hpp"
#include "headsplat/image.hpp"
#include "headsplat/loss.hpp"
#include "headsplat/optimizer.hpp"
#include "headsplat/renderer.hpp"
#include "headsplat/selection.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace headsplat {

struct TrainConfig {
    double lambda = 0.2;
    double scaling_weight = 1.0;
    int global_period = 20;
    int iterations = 2000;
    LearningRates lr;
    int reset_period = 100;
    DensifyConfig densify;
    Vec3 background = Vec3::Ones();
    bool selective = true;
    std::uint64_t seed = 0;
    int sh_degree = 0;
    /// Write a checkpoint every this many iterations (0 disables).
    int checkpoint_period = 0;

    /// Throws Error when a field is out of range.
    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
/// Missing keys keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path);

enum class StepMode { selective, global };

const char* to_string(StepMode mode);

/// Iterations are numbered from 1; every global_period-th one is global.
bool is_global_iteration(int iteration, int global_period);

/// Splats the optimizer may touch: the mask's splats in selective mode,
/// every splat in global mode.
std::vector<std::size_t> apply_freeze_mask(const SelectionMask& mask, StepMode mode,
                                           std::size_t splat_count);

/// Gradients of sum(grad_image * render(model)) with respect to the local
/// parameters of every splat, rendered at precision T. Splats outside
/// `subset` (when given) get zero gradients.
template <typename T>
std::vector<SplatGrad<double>> local_gradients(const SplatModel& model, const FrameRig& rig,
                                               const SplatWorldT<T>& world, const Camera& cam,
                                               const Vec3T<T>& background,
                                               const RenderState<T>& state,
                                               const ImageT<T>& grad_image,
                                               std::optional<std::span<const std::size_t>> subset,
                                               std::vector<double>* mean2d_grad_norm = nullptr);

/// Per-frame state shared by every step of one frame batch: the rig, the
/// selection, and the world realisation of all splats. Frozen splats are
/// read from `world` as-is; trainable ones are refreshed after each update.
struct FrameContext {
    std::size_t frame_index = 0;
    FrameRig rig;
    SelectionMask mask;
    SplatWorld world;

    void refresh(const SplatModel& model, std::span<const std::size_t> splats);
    void rebuild(const SplatModel& model);
};

FrameContext make_frame_context(const MeshSequence& sequence, std::size_t frame,
                                const SplatModel& model, const SelectionCache* selections);

struct StepInput {
    const Camera* camera = nullptr;
    const Image* ground_truth = nullptr;
    StepMode mode = StepMode::global;
    /// Fraction of the run completed; drives the position learning-rate decay.
    double progress = 0.0;
    int iteration = 0;
};

struct StepStats {
    LossTerms terms;
    std::size_t updated = 0;
};

/// One optimisation step on one view. Throws NonFiniteLoss if any loss term
/// is not finite; the model is left untouched in that case.
StepStats train_step(SplatModel& model, SplatAdam& optimizer, FrameContext& context,
                     std::span<const double> neutral_areas, const StepInput& input,
                     const TrainConfig& config, std::vector<double>* grad_accum = nullptr,
                     std::vector<std::uint32_t>* grad_count = nullptr);

struct StepRecord {
    int iteration = 0;
    StepMode mode = StepMode::global;
    std::size_t frame = 0;
    std::size_t view = 0;
    LossTerms terms;
    std::size_t updated = 0;
};

struct TrainHooks {
    /// Called right before and after every optimisation step with the set of
    /// splats the step may update.
    std::function<void(const StepRecord&, const SplatModel&, std::span<const std::size_t>)> before_step;
    std::function<void(const StepRecord&, const SplatModel&, std::span<const std::size_t>)> after_step;
    /// Called after reset / densify maintenance on `iteration`.
    std::function<void(int iteration, const SplatModel&)> after_maintenance;
};

struct TrainOutputs {
    std::optional<std::filesystem::path> metrics_csv;
    std::optional<std::filesystem::path> checkpoint_dir;
    TrainHooks hooks;
};

struct TrainResult {
    SplatModel model;
    std::vector<StepRecord> log;
    std::size_t resets = 0;
    std::size_t densify_events = 0;
};

/// Full loop. Each frame batch supplies one iteration per training view.
/// `selections` may be null only when config.selective is false.
TrainResult train(SplatModel model, const DatasetManifest& manifest, const MeshSequence& sequence,
                  const SelectionCache* selections, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

} // namespace headsplat
