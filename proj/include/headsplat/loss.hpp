#pragma once

#include "headsplat/image.hpp"
#include "headsplat/splat.hpp"

#include <optional>
#include <span>
#include <vector>

namespace headsplat {

struct LossTerms {
    double l1 = 0.0;
    double dssim = 0.0;
    double scaling = 0.0;
    double total = 0.0;
};

/// total = (1 - lambda) l1 + lambda dssim + w_s scaling
double assemble_total(const LossTerms& terms, double lambda, double scaling_weight);

struct RgbLoss {
    double l1 = 0.0;
    double dssim = 0.0;
};

/// L1 (mean absolute difference) and D-SSIM = (1 - SSIM) / 2.
RgbLoss rgb_loss(const Image& rendered, const Image& gt);

/// Same, plus d[(1 - lambda) l1 + lambda dssim] / d rendered.
RgbLoss rgb_loss_with_grad(const Image& rendered, const Image& gt, double lambda,
                           Image& grad_rendered);

/// || ReLU(s - sqrt(2 area_p)) ||_2 over every local scale component of the
/// splats in `subset` (all splats when empty), with area_p the neutral area
/// of each splat's parent face.
double scaling_loss(const SplatModel& model, std::span<const double> neutral_areas,
                    std::optional<std::span<const std::size_t>> subset = std::nullopt);

/// Scaling loss and its gradient with respect to log_scale_em (indexed by
/// splat; zero outside the subset).
double scaling_loss_with_grad(const SplatModel& model, std::span<const double> neutral_areas,
                              std::optional<std::span<const std::size_t>> subset,
                              std::vector<Vec3>& grad_log_scale);

} // namespace headsplat
