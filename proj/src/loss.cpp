#include "headsplat/loss.hpp"

#include "headsplat/avatar.hpp"
#include "headsplat/metrics.hpp"

#include <cmath>

namespace headsplat {

double assemble_total(const LossTerms& terms, double lambda, double scaling_weight) {
    return (1.0 - lambda) * terms.l1 + lambda * terms.dssim + scaling_weight * terms.scaling;
}

RgbLoss rgb_loss(const Image& rendered, const Image& gt) {
    if (rendered.width != gt.width || rendered.height != gt.height) {
        throw DimensionMismatch("rendered and ground-truth images differ in size");
    }
    RgbLoss out;
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        acc += std::abs(double(rendered.data[i]) - double(gt.data[i]));
    }
    out.l1 = rendered.data.empty() ? 0.0 : acc / double(rendered.data.size());
    out.dssim = dssim(rendered, gt);
    return out;
}

RgbLoss rgb_loss_with_grad(const Image& rendered, const Image& gt, double lambda,
                           Image& grad_rendered) {
    if (rendered.width != gt.width || rendered.height != gt.height) {
        throw DimensionMismatch("rendered and ground-truth images differ in size");
    }
    RgbLoss out;
    Image g_ssim;
    const double s = ssim_with_grad(rendered, gt, g_ssim);
    out.dssim = (1.0 - s) / 2.0;

    grad_rendered = Image(rendered.width, rendered.height);
    const double n = double(rendered.data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = double(rendered.data[i]) - double(gt.data[i]);
        acc += std::abs(d);
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        grad_rendered.data[i] =
            static_cast<float>((1.0 - lambda) * sign / n - lambda * 0.5 * double(g_ssim.data[i]));
    }
    out.l1 = acc / n;
    return out;
}

namespace {

template <typename Fn>
void for_subset(const SplatModel& model, std::optional<std::span<const std::size_t>> subset,
                Fn&& fn) {
    if (subset) {
        for (auto i : *subset) fn(i);
    } else {
        for (std::size_t i = 0; i < model.size(); ++i) fn(i);
    }
}

} // namespace

double scaling_loss(const SplatModel& model, std::span<const double> neutral_areas,
                    std::optional<std::span<const std::size_t>> subset) {
    check_binding(model, neutral_areas.size());
    double sq = 0.0;
    for_subset(model, subset, [&](std::size_t i) {
        const auto& s = model.splats[i];
        const double bound = drift_bound(neutral_areas[s.parent_face]);
        for (int a = 0; a < 3; ++a) {
            const double excess = std::exp(s.log_scale_em[a]) - bound;
            if (excess > 0.0) sq += excess * excess;
        }
    });
    return std::sqrt(sq);
}

double scaling_loss_with_grad(const SplatModel& model, std::span<const double> neutral_areas,
                              std::optional<std::span<const std::size_t>> subset,
                              std::vector<Vec3>& grad_log_scale) {
    const double loss = scaling_loss(model, neutral_areas, subset);
    grad_log_scale.assign(model.size(), Vec3::Zero());
    if (loss <= 0.0) return loss;
    for_subset(model, subset, [&](std::size_t i) {
        const auto& s = model.splats[i];
        const double bound = drift_bound(neutral_areas[s.parent_face]);
        for (int a = 0; a < 3; ++a) {
            const double scale = std::exp(s.log_scale_em[a]);
            const double excess = scale - bound;
            if (excess > 0.0) grad_log_scale[i][a] = excess / loss * scale;
        }
    });
    return loss;
}

} // namespace headsplat
