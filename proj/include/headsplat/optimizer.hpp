#pragma once

#include "headsplat/splat.hpp"

#include <span>
#include <vector>

namespace headsplat {

struct LearningRates {
    double position = 1.6e-4;
    /// Position rate decays exponentially to position * position_final_factor.
    double position_final_factor = 0.01;
    double rotation = 1e-3;
    double scale = 5e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;
};

/// Per-splat Adam. Every splat carries its own moments and step count, so a
/// splat that is skipped by a step keeps its state untouched.
class SplatAdam {
public:
    static constexpr int kParamsPerSplat = 3 + 4 + 3 + 1 + 3 * kMaxShCoeffs;

    SplatAdam() = default;
    explicit SplatAdam(std::size_t splat_count) { resize(splat_count); }

    void resize(std::size_t splat_count);
    std::size_t size() const { return steps_.size(); }

    /// Updates the splats listed in `indices` with local gradients `grads`
    /// (indexed by splat). `progress` in [0, 1] drives the position decay.
    /// Quaternions that moved are renormalised.
    void step(SplatModel& model, std::span<const SplatGrad<double>> grads,
              std::span<const std::size_t> indices, const LearningRates& lr, double progress);

    /// Rebuilds state after densification. The first `survivors` output
    /// splats keep the state of splat origin[i]; newly added ones start fresh.
    void remap(std::span<const std::size_t> origin, std::size_t survivors);

    std::span<const double> first_moment(std::size_t splat) const;
    std::size_t step_count(std::size_t splat) const { return steps_[splat]; }

    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;

private:
    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<std::size_t> steps_;
};

double position_lr(const LearningRates& lr, double progress);

} // namespace headsplat
